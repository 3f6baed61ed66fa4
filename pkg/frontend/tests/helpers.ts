import { ApiClient } from "../src/api.js";
import { createApp } from "../src/app.js";
import type { App } from "../src/app.js";
import { FakeService, flush } from "./fakeService.js";

export async function settle(rounds = 4): Promise<void> {
  for (let i = 0; i < rounds; i += 1) await flush();
}

export interface Harness {
  service: FakeService;
  app: App;
  root: HTMLElement;
}

export async function mountApp(): Promise<Harness> {
  const service = new FakeService();
  const root = document.createElement("main");
  document.body.appendChild(root);
  const app = createApp(new ApiClient("", null, service.fetch), root);
  await app.actions.boot();
  await settle();
  return { service, app, root };
}

export function text(root: ParentNode, selector: string): string[] {
  return [...root.querySelectorAll(selector)].map((node) => node.textContent ?? "");
}

export function click(node: Element | null): void {
  if (!node) throw new Error("click target not found");
  (node as HTMLElement).dispatchEvent(new MouseEvent("click", { bubbles: true }));
}
