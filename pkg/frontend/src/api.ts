/**
 * Typed client for the fashionista query service.
 *
 * Each endpoint keeps at most one request in flight: issuing a new call
 * aborts the previous one on the same endpoint, so stale autocomplete or
 * map responses can never clobber newer state.
 */

export interface AutocompleteEntry {
  item_id: string;
  image_ref: string | null;
}

export interface Neighbor {
  item_id: string;
  distance: number;
  fash_score: number;
  fash_rank: number;
  x: number;
  y: number;
  approx_coords: boolean;
  brand: string | null;
  price: number | null;
  rating: number | null;
  categories: string[];
  image_ref: string | null;
}

export interface TrendPoint {
  epoch: string;
  score: number;
  percentile: number;
}

export interface QueryResponse {
  query_item: string;
  epoch: number;
  threshold: number;
  neighbors: Neighbor[];
  epoch_label: string;
  trend: TrendPoint[];
}

export interface ItemDetails {
  item_id: string;
  brand: string | null;
  price: number | null;
  rating: number | null;
  categories: string[];
  image_ref: string | null;
  x: number;
  y: number;
  approx_coords: boolean;
}

export interface MapPoint {
  item_id: string;
  x: number;
  y: number;
  fash_percentile: number;
}

export interface Meta {
  item_count: number;
  epochs: string[];
  categories: string[];
  k_options: number[];
  map_bounds: { x_min: number; x_max: number; y_min: number; y_max: number };
}

export interface HotspotResponse {
  item_id: string;
  neighborhood: { query_item: string; epoch: number; threshold: number; neighbors: Neighbor[] };
  error?: { code: string; message: string };
}

export interface QueryParams {
  item_id: string;
  k: number;
  alpha: number;
  categories: string[];
  epoch?: number;
}

export class ApiError extends Error {
  constructor(public code: string, message: string, public status: number) {
    super(message);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  private inflight = new Map<string, AbortController>();

  constructor(
    private base: string = "",
    private fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  thumbnailUrl(imageRef: string | null): string | null {
    return imageRef ? `${this.base}/static/${imageRef}` : null;
  }

  private async request<T>(endpoint: string, path: string, init?: RequestInit): Promise<T> {
    this.inflight.get(endpoint)?.abort();
    const controller = new AbortController();
    this.inflight.set(endpoint, controller);
    try {
      const response = await this.fetchFn(`${this.base}${path}`, {
        ...init,
        signal: controller.signal,
      });
      const body = await response.json();
      if (!response.ok) {
        const err = body?.error ?? { code: "internal", message: "request failed" };
        throw new ApiError(err.code, err.message, response.status);
      }
      return body as T;
    } finally {
      if (this.inflight.get(endpoint) === controller) {
        this.inflight.delete(endpoint);
      }
    }
  }

  meta(): Promise<Meta> {
    return this.request("meta", "/meta");
  }

  autocomplete(prefix: string, limit = 10): Promise<AutocompleteEntry[]> {
    const params = new URLSearchParams({ prefix, limit: String(limit) });
    return this.request<{ results: AutocompleteEntry[] }>(
      "autocomplete", `/autocomplete?${params}`,
    ).then((r) => r.results);
  }

  query(params: QueryParams): Promise<QueryResponse> {
    return this.request("query", "/query", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(params),
    });
  }

  item(itemId: string): Promise<ItemDetails> {
    return this.request("item", `/item/${encodeURIComponent(itemId)}`);
  }

  trend(itemId: string): Promise<{ item_id: string; trend: TrendPoint[] }> {
    return this.request("trend", `/trend/${encodeURIComponent(itemId)}`);
  }

  map(rect: { xMin: number; xMax: number; yMin: number; yMax: number },
      epoch?: number): Promise<MapPoint[]> {
    const params = new URLSearchParams({
      x_min: String(rect.xMin),
      x_max: String(rect.xMax),
      y_min: String(rect.yMin),
      y_max: String(rect.yMax),
    });
    if (epoch !== undefined) params.set("epoch", String(epoch));
    return this.request<{ points: MapPoint[] }>("map", `/map?${params}`)
      .then((r) => r.points);
  }

  feelingFashionable(options: { categories?: string[]; quantile?: number; seed?: number }):
      Promise<HotspotResponse> {
    const params = new URLSearchParams();
    if (options.categories?.length) params.set("categories", options.categories.join(","));
    if (options.quantile !== undefined) params.set("quantile", String(options.quantile));
    if (options.seed !== undefined) params.set("seed", String(options.seed));
    const suffix = params.toString() ? `?${params}` : "";
    return this.request("feeling-fashionable", `/feeling-fashionable${suffix}`);
  }
}
