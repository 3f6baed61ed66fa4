import { ApiClient } from "./api.js";
import { createApp } from "./app.js";

function apiBase(): string {
  const meta = document.querySelector('meta[name="api-base"]');
  return meta?.getAttribute("content") ?? "";
}

const root = document.getElementById("app");
if (!root) {
  throw new Error("missing #app mount point");
}
const app = createApp(new ApiClient(apiBase()), root);
void app.actions.boot();
