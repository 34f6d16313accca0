/**
 * Drives a complete three-task session against the real Python service:
 * fixture store built by tests/fixtures/make_session.py, served by
 * `causaltext annotate serve` (uvicorn), exercised through the DOM.
 */

import { execFileSync, spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { App } from "../src/app.js";
import type { SessionStats } from "../src/types.js";

const HERE = dirname(fileURLToPath(import.meta.url));
const PORT = 18000 + Math.floor(Math.random() * 20000);
const BASE = `http://127.0.0.1:${PORT}`;

let storeDir: string;
let server: ChildProcess | null = null;

async function waitForService(): Promise<void> {
  const deadline = Date.now() + 30_000;
  while (Date.now() < deadline) {
    try {
      const response = await fetch(`${BASE}/sessions`);
      if (response.ok) return;
    } catch {
      // still starting
    }
    await new Promise((resolve) => setTimeout(resolve, 200));
  }
  throw new Error("annotation service did not come up in time");
}

beforeAll(async () => {
  storeDir = mkdtempSync(join(tmpdir(), "causaltext-ui-"));
  execFileSync("python3", [join(HERE, "fixtures", "make_session.py"), storeDir], {
    stdio: "pipe",
  });
  server = spawn(
    "python3",
    ["-m", "causaltext.cli", "annotate", "serve", "--store", storeDir,
     "--port", String(PORT)],
    { stdio: "ignore" },
  );
  await waitForService();
});

afterAll(() => {
  server?.kill();
  rmSync(storeDir, { recursive: true, force: true });
});

function choose(root: HTMLElement, dimension: string, choice: string): void {
  root
    .querySelector<HTMLButtonElement>(
      `[data-dimension="${dimension}"] button[data-choice="${choice}"]`,
    )
    ?.click();
}

describe("three-task session against the live service", () => {
  it("renders, blocks, submits and matches the service stats", async () => {
    document.body.innerHTML = '<div id="app"></div>';
    const root = document.getElementById("app") as HTMLElement;
    const api = new ApiClient(BASE, "session", fetch);
    const app = new App(root, api, "browser-tester");
    await app.start();

    // Task 1 is the six-node, five-edge sample component.
    expect(root.querySelector("#progress")?.textContent).toBe("Task 1 of 3");
    expect(root.querySelectorAll("[data-node]")).toHaveLength(6);
    expect(root.querySelectorAll("[data-edge]")).toHaveLength(5);
    expect(root.querySelectorAll('[data-polarity="POS"]')).toHaveLength(3);
    expect(root.querySelectorAll('[data-polarity="NEG"]')).toHaveLength(2);
    expect(root.innerHTML).not.toContain("provenance");

    const plan: Array<[string, string]> = [
      ["A", "A"],
      ["B", "A"],
      ["B", "B"],
    ];
    for (const [index, [faithfulness, coverage]] of plan.entries()) {
      expect(root.querySelector("#progress")?.textContent).toBe(
        `Task ${index + 1} of 3`,
      );
      const submit = root.querySelector<HTMLButtonElement>("#submit");
      expect(submit?.disabled).toBe(true);
      choose(root, "faithfulness", faithfulness);
      expect(submit?.disabled).toBe(true);
      choose(root, "coverage", coverage);
      expect(submit?.disabled).toBe(false);
      await app.submit();
    }

    expect(root.textContent).toContain("Session complete");

    const stats = (await (await fetch(`${BASE}/session/session/stats`)).json()) as SessionStats;
    expect(stats.labels).toBe(3);
    for (const dimension of ["faithfulness", "coverage"] as const) {
      for (const [variant, pct] of Object.entries(stats.preference[dimension])) {
        const item = root.querySelector(
          `[data-stats-dimension="${dimension}"] [data-variant="${variant}"]`,
        );
        expect(item?.textContent).toBe(`${variant}: ${pct.toFixed(2)}%`);
      }
    }
  });

  it("resumes at the service-reported next task after a reload", async () => {
    document.body.innerHTML = '<div id="app"></div>';
    const root = document.getElementById("app") as HTMLElement;
    const api = new ApiClient(BASE, "session", fetch);
    const app = new App(root, api, "second-annotator");
    await app.start();
    choose(root, "faithfulness", "A");
    choose(root, "coverage", "A");
    await app.submit();
    expect(root.querySelector("#progress")?.textContent).toBe("Task 2 of 3");

    // Fresh mount simulates a page reload: same annotator, new DOM.
    document.body.innerHTML = '<div id="app"></div>';
    const freshRoot = document.getElementById("app") as HTMLElement;
    const fresh = new App(freshRoot, new ApiClient(BASE, "session", fetch), "second-annotator");
    await fresh.start();
    expect(freshRoot.querySelector("#progress")?.textContent).toBe("Task 2 of 3");
  });
});
