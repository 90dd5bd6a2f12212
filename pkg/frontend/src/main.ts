// Browser entry point: wires the controller to the DOM. Single active
// session per tab; every state change round-trips through the service.

import { SessionApi } from "./api.js";
import { SessionController } from "./controller.js";
import { renderHistory, renderHypotheses, renderQuestion, renderStatus } from "./render.js";

const api = new SessionApi("");
const controller = new SessionController(api);

function $(id: string): HTMLElement {
  return document.getElementById(id)!;
}

function redraw(): void {
  const view = controller.view();
  $("status").innerHTML = renderStatus(view);
  $("question").innerHTML = view.question ? renderQuestion(view.question) : "";
  $("hypotheses").innerHTML = renderHypotheses(view);
  $("history").innerHTML = renderHistory(view.history);
  bindAnswerHandlers();
}

function bindAnswerHandlers(): void {
  for (const btn of document.querySelectorAll<HTMLButtonElement>("button.choice")) {
    btn.onclick = async () => {
      btn.disabled = true;
      await controller.submit(JSON.parse(btn.dataset.answer!));
      redraw();
    };
  }
  const form = document.querySelector<HTMLFormElement>("form.io-answer");
  if (form && !form.classList.contains("object-set")) {
    form.onsubmit = async (ev) => {
      ev.preventDefault();
      const field = form.elements.namedItem("output") as HTMLInputElement;
      await controller.submit(parseInt(field.value, 10));
      redraw();
    };
  }
  if (form && form.classList.contains("object-set")) {
    form.onsubmit = async (ev) => {
      ev.preventDefault();
      const selected = [...document.querySelectorAll<SVGGElement>("g.obj.selected")]
        .map((g) => g.dataset.oid);
      await controller.submit(selected);
      redraw();
    };
    for (const g of document.querySelectorAll<SVGGElement>("g.obj")) {
      g.addEventListener("click", () => g.classList.toggle("selected"));
    }
  }
}

async function boot(): Promise<void> {
  const params = new URLSearchParams(window.location.search);
  await controller.start({
    domain: params.get("domain") ?? "demo",
    benchmark: params.get("benchmark") ?? undefined,
    seed: parseInt(params.get("seed") ?? "0", 10),
    forced_coverage: true,
    input_count: params.has("inputs") ? parseInt(params.get("inputs")!, 10) : undefined,
  });
  redraw();
}

boot().catch((err) => {
  $("status").innerHTML = `<div class="status error">${String(err)}</div>`;
});
