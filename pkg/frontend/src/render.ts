// Pure HTML renderers for the session views. Kept DOM-free so the snapshot
// tests can run in node; main.ts owns insertion and event wiring.

import { ControllerView, HistoryEntry } from "./controller.js";
import { QuestionPayload } from "./api.js";

function esc(s: unknown): string {
  return String(s).replace(/[&<>"]/g, (c) =>
    ({ "&": "&amp;", "<": "&lt;", ">": "&gt;", '"': "&quot;" }[c] as string));
}

export function renderQuestion(q: QuestionPayload): string {
  const r = q.render as any;
  if (r.kind === "perception" && r.image) {
    const buttons = (q.choices ?? [])
      .map((c) => `<button class="choice" data-answer="${esc(JSON.stringify(c))}">${esc(c)}</button>`)
      .join("");
    const attr = r.attribute ? `<p class="attr">attribute: <b>${esc(r.attribute)}</b></p>` : "";
    return `<div class="card perception">
  <h3>What is the correct label?</h3>
  <img class="percept" src="${esc(r.image)}" alt="perception input ${esc(q.key)}">
  ${attr}
  <div class="choices">${buttons}</div>
</div>`;
  }
  if (r.kind === "perception" && r.scene) {
    return `<div class="card perception scene">
  <h3>Label the highlighted object</h3>
  ${renderScene(r.scene)}
  ${r.attribute ? `<p class="attr">attribute: <b>${esc(r.attribute)}</b></p>` : ""}
  <div class="choices">${(q.choices ?? [])
    .map((c) => `<button class="choice" data-answer="${esc(JSON.stringify(c))}">${esc(c)}</button>`)
    .join("")}</div>
</div>`;
  }
  if (r.kind === "io" && r.elements) {
    const thumbs = (r.elements as any[])
      .map((e) => `<img class="thumb" src="${esc(e.image)}" alt="${esc(e.token)}">`)
      .join("");
    return `<div class="card io">
  <h3>What should the program output on this input?</h3>
  <div class="input-strip">${thumbs}</div>
  <form class="io-answer"><input type="number" name="output" required>
  <button type="submit">Answer</button></form>
</div>`;
  }
  if (r.kind === "io" && r.scene) {
    return `<div class="card io scene">
  <h3>Select the objects the program should return</h3>
  ${renderScene(r.scene)}
  <form class="io-answer object-set"><button type="submit">Answer with selected objects</button></form>
</div>`;
  }
  return `<div class="card unknown"><p>Unsupported question payload (schema mismatch?)</p></div>`;
}

export function renderScene(scene: { boxes: { oid: string; box: number[] }[]; highlight?: string }): string {
  const W = 110, H = 110;
  const rects = scene.boxes
    .map((b) => {
      const [l, r, t, btm] = b.box;
      const hl = scene.highlight === b.oid ? " highlight" : "";
      return `<g class="obj${hl}" data-oid="${esc(b.oid)}">` +
        `<rect x="${l}" y="${t}" width="${r - l}" height="${btm - t}"></rect>` +
        `<text x="${l + 1}" y="${t + 8}">${esc(b.oid.split("o").pop())}</text></g>`;
    })
    .join("");
  return `<svg class="scene-view" viewBox="0 0 ${W} ${H}">${rects}</svg>`;
}

export function renderHypotheses(view: ControllerView): string {
  const items = view.sampledPrograms
    .map((p) => `<li><code>${esc(p)}</code></li>`)
    .join("");
  return `<div class="panel hypotheses">
  <h3>${view.hsCount} candidate program${view.hsCount === 1 ? "" : "s"}</h3>
  <ul>${items}</ul>
</div>`;
}

export function renderHistory(history: HistoryEntry[]): string {
  const cells = history
    .map((h) => `<span class="round" title="${esc(h.target)}(${esc(h.key)}) = ${esc(JSON.stringify(h.answer))}">` +
      `${h.hsBefore}&rarr;${h.hsAfter}</span>`)
    .join("");
  return `<div class="strip history">${cells}</div>`;
}

export function renderStatus(view: ControllerView): string {
  if (view.error) {
    return `<div class="status error">${esc(view.error)} <button class="retry">retry</button></div>`;
  }
  if (view.status === "selecting" && view.progress) {
    return `<div class="status selecting">selecting next question&hellip; ` +
      `${view.progress.scored}/${view.progress.total} (${esc(view.progress.stage)})</div>`;
  }
  if (view.status === "converged") {
    return `<div class="status converged"><h3>Converged</h3>` +
      `<p>All remaining candidates are observationally equivalent.</p>` +
      `<pre class="program">${esc(view.program ?? "")}</pre></div>`;
  }
  if (view.status === "failed") {
    return `<div class="status failed">The hypothesis space emptied: a prediction set missed the true label.</div>`;
  }
  return "";
}
