import { describe, expect, it } from "vitest";

import { renderHistory, renderQuestion, renderScene, renderStatus } from "../src/render.js";

describe("render", () => {
  it("digit payload renders the image and only the served label buttons", () => {
    const html = renderQuestion({
      token: "t",
      target: "toDigit",
      key: "x2",
      input_id: "I",
      render: { kind: "perception", image: "data:image/png;base64,AAA" },
      choices: [8, 0],
    });
    expect(html).toContain('src="data:image/png;base64,AAA"');
    const buttons = html.match(/button class="choice"/g) ?? [];
    expect(buttons).toHaveLength(2);
    expect(html).toContain('data-answer="8"');
    expect(html).toContain('data-answer="0"');
    expect(html).not.toContain('data-answer="5"');
  });

  it("IO payload renders thumbnails and an integer output field", () => {
    const html = renderQuestion({
      token: "t",
      target: "synthfunc",
      key: "I",
      input_id: "I",
      render: {
        kind: "io",
        elements: [1, 2, 3, 4].map((i) => ({ token: `x${i}`, image: `data:i${i}` })),
        answer_schema: "integer",
      },
      choices: null,
    });
    expect(html.match(/class="thumb"/g)).toHaveLength(4);
    expect(html).toContain('type="number"');
  });

  it("scene payload snapshot: boxes with highlight marker", () => {
    const html = renderScene({
      boxes: [
        { oid: "s0o0", box: [0, 10, 0, 12] },
        { oid: "s0o1", box: [20, 34, 5, 25] },
      ],
      highlight: "s0o1",
    });
    expect(html).toMatchInlineSnapshot(
      `"<svg class="scene-view" viewBox="0 0 110 110"><g class="obj" data-oid="s0o0"><rect x="0" y="0" width="10" height="12"></rect><text x="1" y="8">0</text></g><g class="obj highlight" data-oid="s0o1"><rect x="20" y="5" width="14" height="20"></rect><text x="21" y="13">1</text></g></svg>"`,
    );
  });

  it("status shows convergence with the program", () => {
    const html = renderStatus({
      status: "converged",
      hsCount: 3,
      question: null,
      program: "(def synthfunc (l) 1)",
      sampledPrograms: [],
      history: [],
      progress: null,
      error: null,
    });
    expect(html).toContain("Converged");
    expect(html).toContain("(def synthfunc (l) 1)");
  });

  it("history strip is append-only rendering of hs transitions", () => {
    const html = renderHistory([
      { round: 0, target: "toDigit", key: "x2", answer: 0, hsBefore: 4, hsAfter: 3 },
      { round: 1, target: "toDigit", key: "x3", answer: 9, hsBefore: 3, hsAfter: 3 },
    ]);
    expect(html.match(/class="round"/g)).toHaveLength(2);
    expect(html).toContain("4&rarr;3");
  });
});
