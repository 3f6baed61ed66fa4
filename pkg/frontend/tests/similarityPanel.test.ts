// @vitest-environment jsdom
import { afterEach, describe, expect, it } from "vitest";

import { fixtureNeighbors } from "./fakeService.js";
import { click, mountApp, settle } from "./helpers.js";

afterEach(() => {
  document.body.innerHTML = "";
});

describe("similarity panel", () => {
  it("renders one card per neighbor with the API's values, in rank order", async () => {
    const { app, root } = await mountApp();
    await app.actions.selectCase("c0000");
    await settle();

    const expected = fixtureNeighbors("ensemble", 5);
    const cards = [...root.querySelectorAll(".neighbor-card")];
    expect(cards).toHaveLength(5);
    cards.forEach((card, i) => {
      expect(card.getAttribute("data-case-id")).toBe(expected[i].case_id);
      expect(card.getAttribute("data-rank")).toBe(String(expected[i].rank));
      expect(card.getAttribute("data-score")).toBe(String(expected[i].score));
      expect(card.querySelector(".neighbor-score")?.textContent).toBe(
        expected[i].score.toFixed(4),
      );
      expect(card.querySelector(".neighbor-dx")?.textContent).toBe(
        `Diagnosis: ${expected[i].metadata.cytology_diagnosis}`,
      );
      expect(card.querySelector(".neighbor-bethesda")?.textContent).toBe(
        `Bethesda: ${expected[i].metadata.bethesda}`,
      );
      expect(card.querySelector(".neighbor-note")?.textContent).toBe(
        expected[i].metadata.interpretation,
      );
    });
  });

  it("shows only service-provided numbers (no locally computed scores)", async () => {
    const { app, root } = await mountApp();
    await app.actions.selectCase("c0000");
    await settle();

    const serviceNumbers = new Set<number>();
    for (const neighbor of fixtureNeighbors("ensemble", 5)) {
      serviceNumbers.add(neighbor.score);
      serviceNumbers.add(neighbor.rank);
      serviceNumbers.add(neighbor.metadata.magnification);
      for (const hit of neighbor.contributing ?? []) {
        serviceNumbers.add(hit.score);
        serviceNumbers.add(hit.rank);
      }
    }
    const panel = root.querySelector("#similarity-panel")!;
    const walker = document.createTreeWalker(panel, NodeFilter.SHOW_TEXT);
    const numericTokens: string[] = [];
    while (walker.nextNode()) {
      numericTokens.push(...((walker.currentNode.textContent ?? "").match(/\d+\.\d+/g) ?? []));
    }
    expect(numericTokens.length).toBeGreaterThan(0);
    for (const token of numericTokens) {
      const fromService = [...serviceNumbers].some(
        (value) => value.toFixed(4) === token || String(value) === token,
      );
      expect(fromService, `displayed number ${token} must come from the API`).toBe(true);
    }
  });

  it("switches tabs per encoder and requests that encoder", async () => {
    const { app, root, service } = await mountApp();
    await app.actions.selectCase("c0000");
    await settle();
    click(root.querySelector('.tab[data-model="alpha"]'));
    await settle();
    const calls = service.callsTo("/v1/cases/c0000/similar");
    expect(calls[calls.length - 1].path).toContain("encoder=alpha");
    const cards = root.querySelectorAll(".neighbor-card");
    expect(cards[0].getAttribute("data-score")).toBe(
      String(fixtureNeighbors("alpha", 5)[0].score),
    );
  });

  it("discards stale responses (latest request wins)", async () => {
    const { app, root, service } = await mountApp();
    await app.actions.selectCase("c0000");
    await settle();

    let release!: () => void;
    service.deferNext.set(
      "/v1/cases/c0000/similar",
      new Promise<void>((resolve) => {
        release = resolve;
      }),
    );
    const slow = app.actions.setK(10); // deferred response for k=10
    await settle(1);
    await app.actions.setK(3); // newer request, resolves immediately
    await settle();
    expect(root.querySelectorAll(".neighbor-card")).toHaveLength(3);

    release(); // stale k=10 response lands late
    await slow;
    await settle();
    expect(root.querySelectorAll(".neighbor-card")).toHaveLength(3);
  });

  it("renders the error code with a retry affordance on failure", async () => {
    const { app, root, service } = await mountApp();
    service.failNext.set("/v1/cases/c0000/similar", { status: 422, code: "missing_embedding" });
    await app.actions.selectCase("c0000");
    await settle();
    expect(root.querySelector("#similarity-panel .error-code")?.textContent).toBe(
      "missing_embedding",
    );
    click(root.querySelector("#similarity-panel .retry"));
    await settle();
    expect(root.querySelectorAll(".neighbor-card")).toHaveLength(5);
  });
});
