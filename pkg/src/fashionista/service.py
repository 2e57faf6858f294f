"""HTTP facade over the index: configuration, startup lifecycle, endpoints.

Every endpoint is a pure function of the immutable IndexSet snapshot and
the request, so identical requests return byte-identical bodies and any
number of requests may run concurrently. The one sanctioned source of
variation, the hotspot draw, becomes deterministic when the caller pins a
seed query parameter.

Error envelope: failures return {"error": {"code", "message"}} with
unknown_item -> 404, bad_request -> 400, no_candidates -> 200 (empty
result is an answer, not a failure), internal -> 500.
"""

from __future__ import annotations

import json
import logging
import os
import secrets
from dataclasses import dataclass, field, asdict
from typing import Optional

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from . import index as index_ops
from . import model as model_ops
from .data import load_catalog, load_interactions, segment_epochs
from .index import IndexSet, Query, build_indices, select_map_sample
from .model import FashionModel, Hyperparams, ModelFormatError, load_model, save_model, train
from .tsne import TsneParams, tsne_embed

log = logging.getLogger("fashionista")


class StartupError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"startup failed at stage '{stage}': {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class ServiceConfig:
    catalog_path: str
    interactions_path: str
    model_path: str
    port: int = 8080
    host: str = "127.0.0.1"
    epoch_granularity: object = "calendar_year"  # "calendar_year" or int
    hyperparams: Hyperparams = field(default_factory=Hyperparams)
    tsne: TsneParams = field(default_factory=TsneParams)
    map_sample_cap: int = 5000
    map_sample_seed: int = 0
    static_dir: Optional[str] = None
    cors_origins: list = field(default_factory=lambda: ["*"])

    def validate(self) -> None:
        if not self.catalog_path or not self.interactions_path or not self.model_path:
            raise ValueError("catalog_path, interactions_path, model_path must be set")
        if not 1 <= self.port <= 65535:
            raise ValueError("port must be in [1, 65535]")
        if self.map_sample_cap < 4:
            raise ValueError("map_sample_cap must be >= 4")


def load_config(path: str) -> ServiceConfig:
    """Read a JSON config file; relative paths resolve against its directory."""
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    base = os.path.dirname(os.path.abspath(path))

    def resolve(p):
        return p if p is None or os.path.isabs(p) else os.path.join(base, p)

    cfg = ServiceConfig(
        catalog_path=resolve(raw["catalog_path"]),
        interactions_path=resolve(raw["interactions_path"]),
        model_path=resolve(raw["model_path"]),
        port=raw.get("port", 8080),
        host=raw.get("host", "127.0.0.1"),
        epoch_granularity=raw.get("epoch_granularity", "calendar_year"),
        hyperparams=Hyperparams(**raw.get("hyperparams", {})),
        tsne=TsneParams(**raw.get("tsne", {})),
        map_sample_cap=raw.get("map_sample_cap", 5000),
        map_sample_seed=raw.get("map_sample_seed", 0),
        static_dir=resolve(raw.get("static_dir")),
        cors_origins=raw.get("cors_origins", ["*"]),
    )
    cfg.validate()
    return cfg


class ServiceState:
    def __init__(self, config: ServiceConfig, model: FashionModel, index_set: IndexSet,
                 trained: bool):
        self.config = config
        self.model = model
        self.index_set = index_set
        self.trained = trained
        self.ready = True


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except Exception as exc:
        raise StartupError(name, exc) from exc


def build_service_state(config: ServiceConfig, force_train: bool = False) -> ServiceState:
    """Load or train the model, embed the map, and build indices."""
    config.validate()
    catalog = _stage("load_catalog", load_catalog, config.catalog_path)
    interactions = _stage("load_interactions", load_interactions, config.interactions_path, catalog)
    epoch_table = _stage("segment_epochs", segment_epochs, interactions, config.epoch_granularity)

    model = None
    trained = False
    if not force_train and os.path.exists(config.model_path):
        try:
            model = load_model(config.model_path)
            log.info("loaded model from %s", config.model_path)
        except ModelFormatError as exc:
            log.warning("refusing model file %s (%s); falling back to training",
                        config.model_path, exc)
    if model is None:
        model = _stage("train", train, catalog, interactions, epoch_table, config.hyperparams)
        trained = True
        _stage("save_model", save_model, model, config.model_path)
        log.info("trained model and saved to %s", config.model_path)

    map_indices = _stage("map_sample", select_map_sample, catalog, config.map_sample_cap,
                         config.map_sample_seed)
    theta_sample = [model_ops.style_position(model, catalog[i]) for i in map_indices]
    embedding = _stage("tsne_embed", tsne_embed, theta_sample, config.tsne)
    index_set = _stage("build_indices", build_indices, catalog, model, embedding, map_indices)
    return ServiceState(config, model, index_set, trained)


def _error(code: str, message: str) -> JSONResponse:
    status = {"unknown_item": 404, "bad_request": 400, "no_candidates": 200, "internal": 500}[code]
    return JSONResponse({"error": {"code": code, "message": message}}, status_code=status)


def _entry_json(e) -> dict:
    return {
        "item_id": e.item_id,
        "distance": e.distance,
        "fash_score": e.fash_score,
        "fash_rank": e.fash_rank,
        "x": e.x,
        "y": e.y,
        "approx_coords": e.approx_coords,
        **e.metadata,
    }


def _result_json(result) -> dict:
    return {
        "query_item": result.query_item,
        "epoch": result.epoch,
        "threshold": result.threshold,
        "neighbors": [_entry_json(e) for e in result.entries],
    }


def _trend_json(points) -> list:
    return [{"epoch": label, "score": score, "percentile": pct} for label, score, pct in points]


def _parse_int(raw, name, default=None, lo=None, hi=None):
    if raw is None:
        if default is None:
            raise ValueError(f"missing required parameter '{name}'")
        return default
    try:
        v = int(raw)
    except (TypeError, ValueError):
        raise ValueError(f"parameter '{name}' must be an integer") from None
    if (lo is not None and v < lo) or (hi is not None and v > hi):
        raise ValueError(f"parameter '{name}' out of range [{lo}, {hi}]")
    return v


def _parse_float(raw, name, default=None, lo=None, hi=None):
    if raw is None:
        if default is None:
            raise ValueError(f"missing required parameter '{name}'")
        return default
    try:
        v = float(raw)
    except (TypeError, ValueError):
        raise ValueError(f"parameter '{name}' must be a number") from None
    if (lo is not None and v < lo) or (hi is not None and v > hi):
        raise ValueError(f"parameter '{name}' out of range [{lo}, {hi}]")
    return v


def create_app(config: ServiceConfig, force_train: bool = False,
               state: Optional[ServiceState] = None) -> FastAPI:
    """Build the whole service eagerly; the app is ready once this returns."""
    if state is None:
        state = build_service_state(config, force_train=force_train)
    app = FastAPI(title="fashionista", docs_url=None, redoc_url=None)
    app.state.fashionista = state
    if config.cors_origins:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=config.cors_origins,
            allow_methods=["*"],
            allow_headers=["*"],
        )
    if config.static_dir and os.path.isdir(config.static_dir):
        from fastapi.staticfiles import StaticFiles

        app.mount("/static", StaticFiles(directory=config.static_dir), name="static")

    idx: IndexSet = state.index_set

    @app.get("/healthz")
    def healthz():
        if not state.ready:
            return JSONResponse({"status": "starting"}, status_code=503)
        return JSONResponse({"status": "ok"})

    @app.get("/meta")
    def meta():
        xs, ys = idx.coords[idx.map_indices, 0], idx.coords[idx.map_indices, 1]
        return JSONResponse(
            {
                "item_count": idx.n_items,
                "epochs": list(idx.epoch_labels),
                "categories": sorted(idx.postings),
                "k_options": [10, 20, 50, 100, 200, 500],
                "map_bounds": {
                    "x_min": float(xs.min()),
                    "x_max": float(xs.max()),
                    "y_min": float(ys.min()),
                    "y_max": float(ys.max()),
                },
            }
        )

    @app.get("/autocomplete")
    def autocomplete_endpoint(request: Request):
        params = request.query_params
        if "prefix" not in params:
            return _error("bad_request", "missing required parameter 'prefix'")
        try:
            limit = _parse_int(params.get("limit"), "limit", default=10, lo=1, hi=50)
        except ValueError as exc:
            return _error("bad_request", str(exc))
        results = index_ops.autocomplete(idx.trie, params["prefix"], limit)
        return JSONResponse({"results": results})

    @app.post("/query")
    async def query_endpoint(request: Request):
        try:
            body = await request.json()
        except Exception:
            return _error("bad_request", "body must be valid JSON")
        if not isinstance(body, dict) or "item_id" not in body:
            return _error("bad_request", "body must be an object with 'item_id'")
        try:
            k = _parse_int(body.get("k"), "k", default=10, lo=1, hi=500)
            alpha = _parse_float(body.get("alpha"), "alpha", default=0.0, lo=0.0, hi=1.0)
            epoch = body.get("epoch")
            if epoch is not None:
                epoch = _parse_int(epoch, "epoch", lo=0, hi=idx.n_epochs - 1)
            categories = body.get("categories") or []
            if not isinstance(categories, list):
                raise ValueError("'categories' must be a list of names")
        except ValueError as exc:
            return _error("bad_request", str(exc))
        query = Query(
            item_id=str(body["item_id"]),
            k=k,
            alpha=alpha,
            categories=frozenset(str(c) for c in categories),
            epoch=epoch,
        )
        try:
            result = index_ops.knn_query(idx, query)
            trend = index_ops.trend_lookup(idx, query.item_id)
        except index_ops.UnknownItem as exc:
            return _error("unknown_item", f"unknown item {exc.args[0]!r}")
        except index_ops.InvalidQuery as exc:
            return _error("bad_request", str(exc))
        payload = _result_json(result)
        payload["epoch_label"] = idx.epoch_labels[result.epoch]
        payload["trend"] = _trend_json(trend)
        return JSONResponse(payload)

    @app.get("/trend/{item_id}")
    def trend_endpoint(item_id: str):
        try:
            points = index_ops.trend_lookup(idx, item_id)
        except index_ops.UnknownItem:
            return _error("unknown_item", f"unknown item {item_id!r}")
        return JSONResponse({"item_id": item_id, "trend": _trend_json(points)})

    @app.get("/item/{item_id}")
    def item_endpoint(item_id: str):
        i = idx.id_to_index.get(item_id)
        if i is None:
            return _error("unknown_item", f"unknown item {item_id!r}")
        item = idx.items[i]
        return JSONResponse(
            {
                "item_id": item.id,
                **item.metadata(),
                "x": float(idx.coords[i, 0]),
                "y": float(idx.coords[i, 1]),
                "approx_coords": bool(idx.approx_flags[i]),
            }
        )

    @app.get("/map")
    def map_endpoint(request: Request):
        params = request.query_params
        try:
            x_min = _parse_float(params.get("x_min"), "x_min")
            x_max = _parse_float(params.get("x_max"), "x_max")
            y_min = _parse_float(params.get("y_min"), "y_min")
            y_max = _parse_float(params.get("y_max"), "y_max")
            epoch = params.get("epoch")
            if epoch is not None:
                epoch = _parse_int(epoch, "epoch", lo=0, hi=idx.n_epochs - 1)
        except ValueError as exc:
            return _error("bad_request", str(exc))
        try:
            points = index_ops.map_slice(idx, x_min, x_max, y_min, y_max, epoch)
        except index_ops.InvalidViewport as exc:
            return _error("bad_request", str(exc))
        return JSONResponse({"points": points})

    @app.get("/feeling-fashionable")
    def hotspot_endpoint(request: Request):
        params = request.query_params
        try:
            quantile = _parse_float(params.get("quantile"), "quantile", default=0.9, lo=0.0, hi=1.0)
            seed = params.get("seed")
            seed = _parse_int(seed, "seed") if seed is not None else secrets.randbits(31)
        except ValueError as exc:
            return _error("bad_request", str(exc))
        categories = frozenset(c for c in (params.get("categories") or "").split(",") if c)
        try:
            hotspot = index_ops.random_hotspot(idx, categories, quantile=quantile, seed=seed)
        except index_ops.NoCandidates as exc:
            return _error("no_candidates", str(exc))
        payload = {
            "item_id": hotspot["item_id"],
            "neighborhood": _result_json(hotspot["neighborhood"]),
        }
        payload["neighborhood"]["epoch_label"] = idx.epoch_labels[hotspot["neighborhood"].epoch]
        return JSONResponse(payload)

    return app
