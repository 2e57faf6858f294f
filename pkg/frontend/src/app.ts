/**
 * Three-panel interface wiring: query generator, fashion trend exhibitor,
 * and the visual space explorer with click-to-requery.
 *
 * The app keeps no server-side state: every view is a function of the
 * last responses, so replaying the same interactions (with a seeded
 * hotspot) reproduces the same screens.
 */

import { ApiClient, ApiError, ItemDetails, Meta, QueryResponse } from "./api.js";
import { legendGradient } from "./color.js";
import { debounce } from "./debounce.js";
import { Explorer } from "./explorer.js";
import { TrendChart } from "./trend.js";

export interface AppOptions {
  autocompleteDebounceMs?: number;
  sliderDebounceMs?: number;
  mapSettleDebounceMs?: number;
  hotspotSeed?: number;
}

export interface App {
  api: ApiClient;
  meta: Meta;
  explorer: Explorer;
  trendChart: TrendChart;
  elements: Record<string, HTMLElement>;
  state: {
    knownItemId: string | null;
    lastQuery: QueryResponse | null;
    panelItem: ItemDetails | null;
  };
  submitQuery(itemId: string): Promise<void>;
  currentAlpha(): number;
  currentK(): number;
  selectedCategories(): string[];
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K, className?: string, text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export async function createApp(
  root: HTMLElement, api: ApiClient, options: AppOptions = {},
): Promise<App> {
  const meta = await api.meta();

  // ------------------------------------------------------- query generator
  const panel = el("div", "query-panel");
  panel.appendChild(el("h2", undefined, "query generator"));

  const catBox = el("fieldset", "categories");
  catBox.appendChild(el("legend", undefined, "categories"));
  for (const name of meta.categories) {
    const label = el("label");
    const cb = el("input") as HTMLInputElement;
    cb.type = "checkbox";
    cb.value = name;
    cb.className = "category-check";
    label.appendChild(cb);
    label.appendChild(document.createTextNode(name));
    catBox.appendChild(label);
  }
  panel.appendChild(catBox);

  const idRow = el("div", "id-row");
  const idInput = el("input", "item-id-input") as HTMLInputElement;
  idInput.placeholder = "item id...";
  idInput.setAttribute("autocomplete", "off");
  const dropdown = el("ul", "autocomplete-dropdown");
  idRow.appendChild(idInput);
  idRow.appendChild(dropdown);
  panel.appendChild(idRow);

  const kSelect = el("select", "k-select") as HTMLSelectElement;
  for (const k of meta.k_options) {
    const opt = el("option", undefined, String(k)) as HTMLOptionElement;
    opt.value = String(k);
    kSelect.appendChild(opt);
  }
  kSelect.value = String(meta.k_options[0] ?? 10);
  const kLabel = el("label", "k-label", "neighbors ");
  kLabel.appendChild(kSelect);
  panel.appendChild(kLabel);

  const slider = el("input", "alpha-slider") as HTMLInputElement;
  slider.type = "range";
  slider.min = "0";
  slider.max = "100";
  slider.value = "0";
  const alphaValue = el("span", "alpha-value", "0.00");
  const sliderLabel = el("label", "alpha-label", "fashionability filter ");
  sliderLabel.appendChild(slider);
  sliderLabel.appendChild(alphaValue);
  panel.appendChild(sliderLabel);

  const epochSelect = el("select", "epoch-select") as HTMLSelectElement;
  meta.epochs.forEach((label, i) => {
    const opt = el("option", undefined, label) as HTMLOptionElement;
    opt.value = String(i);
    epochSelect.appendChild(opt);
  });
  epochSelect.value = String(meta.epochs.length - 1); // latest by default
  const epochLabel = el("label", "epoch-label", "epoch ");
  epochLabel.appendChild(epochSelect);
  panel.appendChild(epochLabel);

  const submit = el("button", "submit-btn", "search") as HTMLButtonElement;
  submit.disabled = true; // until the id resolves via autocompletion
  panel.appendChild(submit);

  const lucky = el("button", "hotspot-btn", "I'm feeling fashionable!") as HTMLButtonElement;
  panel.appendChild(lucky);

  const status = el("div", "status");
  panel.appendChild(status);

  // ------------------------------------------------------------- explorer
  const center = el("div", "explorer-wrap");
  const canvas = el("canvas", "explorer-canvas") as HTMLCanvasElement;
  canvas.width = 760;
  canvas.height = 560;
  const legend = el("div", "legend");
  legend.appendChild(el("span", "legend-min", "less fashionable"));
  const bar = el("div", "legend-bar");
  bar.style.background = legendGradient();
  legend.appendChild(bar);
  legend.appendChild(el("span", "legend-max", "more fashionable"));
  const rotateRow = el("div", "rotate-row");
  const rotL = el("button", "rotate-left", "⟲") as HTMLButtonElement;
  const rotR = el("button", "rotate-right", "⟳") as HTMLButtonElement;
  rotateRow.appendChild(rotL);
  rotateRow.appendChild(rotR);
  center.appendChild(legend);
  center.appendChild(canvas);
  center.appendChild(rotateRow);

  // ----------------------------------------------------- trend + product
  const side = el("div", "side-panels");
  const trendTitle = el("div", "trend-title");
  const trendCanvas = el("canvas", "trend-canvas") as HTMLCanvasElement;
  trendCanvas.width = 360;
  trendCanvas.height = 200;
  side.appendChild(el("h2", undefined, "fashion trend"));
  side.appendChild(trendTitle);
  side.appendChild(trendCanvas);

  side.appendChild(el("h2", undefined, "product"));
  const product = el("div", "product-panel");
  const thumb = el("img", "product-thumb") as HTMLImageElement;
  thumb.alt = "";
  const requeryBtn = el("button", "product-id") as HTMLButtonElement;
  const fields = el("dl", "product-fields");
  product.appendChild(thumb);
  product.appendChild(requeryBtn);
  product.appendChild(fields);
  side.appendChild(product);

  root.appendChild(panel);
  root.appendChild(center);
  root.appendChild(side);

  // ----------------------------------------------------------------- state
  const state: App["state"] = { knownItemId: null, lastQuery: null, panelItem: null };
  const bounds = {
    xMin: meta.map_bounds.x_min,
    xMax: meta.map_bounds.x_max,
    yMin: meta.map_bounds.y_min,
    yMax: meta.map_bounds.y_max,
  };
  const trendChart = new TrendChart(trendCanvas, trendTitle);

  const currentEpoch = (): number | undefined => {
    const v = Number(epochSelect.value);
    return v === meta.epochs.length - 1 ? undefined : v;
  };

  const refreshBackdrop = async (rect: { xMin: number; xMax: number; yMin: number; yMax: number }) => {
    try {
      explorer.setBackdrop(await api.map(rect, currentEpoch()));
    } catch (err) {
      ignoreAbort(err);
    }
  };

  const explorer = new Explorer(
    canvas, bounds,
    {
      onViewportSettled: (rect) => void refreshBackdrop(rect),
      onPointClicked: (itemId) => void showItem(itemId),
    },
    options.mapSettleDebounceMs ?? 200,
  );

  const currentAlpha = () => Number(slider.value) / 100;
  const currentK = () => Number(kSelect.value);
  const selectedCategories = () =>
    Array.from(panel.querySelectorAll<HTMLInputElement>(".category-check:checked")).map(
      (c) => c.value,
    );

  function setStatus(text: string): void {
    status.textContent = text;
  }

  function ignoreAbort(err: unknown): void {
    if (err instanceof DOMException && err.name === "AbortError") return;
    if (err instanceof ApiError) {
      setStatus(`${err.code}: ${err.message}`);
      return;
    }
    throw err;
  }

  function fillProductPanel(details: ItemDetails): void {
    state.panelItem = details;
    requeryBtn.textContent = details.item_id;
    const url = api.thumbnailUrl(details.image_ref);
    if (url) {
      thumb.src = url;
      thumb.style.display = "";
    } else {
      thumb.style.display = "none";
    }
    fields.textContent = "";
    const rows: Array<[string, string]> = [
      ["brand", details.brand ?? "—"],
      ["price", details.price === null ? "—" : `$${details.price.toFixed(2)}`],
      ["rating", details.rating === null ? "—" : details.rating.toFixed(1)],
      ["categories", details.categories.join(", ")],
    ];
    for (const [dt, dd] of rows) {
      fields.appendChild(el("dt", undefined, dt));
      fields.appendChild(el("dd", undefined, dd));
    }
  }

  async function showItem(itemId: string): Promise<void> {
    try {
      fillProductPanel(await api.item(itemId));
    } catch (err) {
      ignoreAbort(err);
    }
  }

  async function submitQuery(itemId: string): Promise<void> {
    try {
      const response = await api.query({
        item_id: itemId,
        k: currentK(),
        alpha: currentAlpha(),
        categories: selectedCategories(),
        epoch: currentEpoch(),
      });
      state.lastQuery = response;
      trendChart.setSeries(response.query_item, response.trend);
      const details = await api.item(itemId);
      explorer.setResults({ id: itemId, x: details.x, y: details.y }, response.neighbors);
      fillProductPanel(details);
      setStatus(
        `${response.neighbors.length} neighbors at epoch ${response.epoch_label}, ` +
        `threshold ${response.threshold.toFixed(3)}`,
      );
    } catch (err) {
      ignoreAbort(err);
    }
  }

  // -------------------------------------------------- autocomplete wiring
  function renderDropdown(entries: Array<{ item_id: string; image_ref: string | null }>): void {
    dropdown.textContent = "";
    for (const entry of entries) {
      const li = el("li", "autocomplete-entry");
      const img = el("img", "autocomplete-thumb") as HTMLImageElement;
      const url = api.thumbnailUrl(entry.image_ref);
      if (url) img.src = url;
      li.appendChild(img);
      li.appendChild(el("span", "autocomplete-id", entry.item_id));
      li.addEventListener("click", () => {
        idInput.value = entry.item_id;
        state.knownItemId = entry.item_id;
        submit.disabled = false;
        dropdown.textContent = "";
      });
      dropdown.appendChild(li);
    }
  }

  const runAutocomplete = debounce(async (prefix: string) => {
    try {
      const entries = await api.autocomplete(prefix, 10);
      renderDropdown(entries);
      if (entries.some((e) => e.item_id === idInput.value)) {
        state.knownItemId = idInput.value;
        submit.disabled = false;
      }
    } catch (err) {
      ignoreAbort(err);
    }
  }, options.autocompleteDebounceMs ?? 150);

  idInput.addEventListener("input", () => {
    state.knownItemId = null;
    submit.disabled = true;
    const prefix = idInput.value;
    if (!prefix) {
      dropdown.textContent = ""; // empty input clears the dropdown, no request
      return;
    }
    runAutocomplete(prefix);
  });

  submit.addEventListener("click", () => {
    if (state.knownItemId) void submitQuery(state.knownItemId);
  });

  // clicking the id in the product panel replays the query with that item,
  // preserving categories, k, and the slider position
  requeryBtn.addEventListener("click", () => {
    const target = requeryBtn.textContent;
    if (target) {
      idInput.value = target;
      state.knownItemId = target;
      submit.disabled = false;
      void submitQuery(target);
    }
  });

  const sliderRequery = debounce(() => {
    if (state.lastQuery) void submitQuery(state.lastQuery.query_item);
  }, options.sliderDebounceMs ?? 200);

  slider.addEventListener("input", () => {
    alphaValue.textContent = currentAlpha().toFixed(2);
    sliderRequery();
  });

  lucky.addEventListener("click", async () => {
    try {
      const hot = await api.feelingFashionable({
        categories: selectedCategories(),
        quantile: 0.9,
        seed: options.hotspotSeed,
      });
      if (hot.error) {
        setStatus(`${hot.error.code}: ${hot.error.message}`);
        return;
      }
      idInput.value = hot.item_id;
      state.knownItemId = hot.item_id;
      submit.disabled = false;
      await submitQuery(hot.item_id);
    } catch (err) {
      ignoreAbort(err);
    }
  });

  rotL.addEventListener("click", () => explorer.rotate(Math.PI / 12));
  rotR.addEventListener("click", () => explorer.rotate(-Math.PI / 12));

  // initial backdrop
  await refreshBackdrop(explorer.visibleRect());

  return {
    api, meta, explorer, trendChart, state,
    elements: {
      panel, idInput, dropdown, kSelect, slider, epochSelect, submit, lucky,
      status, canvas, trendCanvas, requeryBtn, product, catBox,
    },
    submitQuery,
    currentAlpha,
    currentK,
    selectedCategories,
  };
}
