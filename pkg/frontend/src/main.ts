import { ApiClient } from "./api.js";
import { createApp } from "./app.js";

const params = new URLSearchParams(window.location.search);
const apiBase = params.get("api") ?? "http://127.0.0.1:8080";
const seedParam = params.get("seed");

const root = document.getElementById("app");
if (!root) throw new Error("missing #app root element");

createApp(root, new ApiClient(apiBase), {
  hotspotSeed: seedParam === null ? undefined : Number(seedParam),
}).catch((err) => {
  root.textContent = `failed to start: ${err}`;
});
