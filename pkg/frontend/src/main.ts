/** Hash-routed entry point: #/run walks questionnaires, #/score deals
 * scoring sheets. All rendering is plain DOM; every state change comes
 * from an API round-trip.
 */

import { ApiClient, QuestionnaireSummary } from "./api.js";
import { MAX_QUESTIONS, RunnerFlow, RunnerState } from "./runner.js";
import { SCORE_CHOICES, ScoringFlow, ScoringState } from "./scoring.js";

declare global {
  interface Window {
    SCREENQUEST_API?: string;
  }
}

const api = new ApiClient(
  window.SCREENQUEST_API ?? "",
  (url, init) => fetch(url, init),
  sessionStorage.getItem("rater_token"),
);

const root = document.getElementById("app")!;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  text?: string,
  className?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (text !== undefined) node.textContent = text;
  if (className) node.className = className;
  return node;
}

function button(label: string, onClick: () => void): HTMLButtonElement {
  const node = el("button", label);
  node.addEventListener("click", onClick);
  return node;
}

function clear(): HTMLElement {
  root.replaceChildren();
  return root;
}

function errorBanner(message: string, retry: (() => void) | null): HTMLElement {
  const banner = el("div", undefined, "error-banner");
  banner.append(el("p", `Request failed: ${message}`));
  if (retry) banner.append(button("Retry", retry));
  return banner;
}

// ---- home / pickers ------------------------------------------------------

async function renderHome(prefix: string): Promise<void> {
  const container = clear();
  container.append(el("h1", "screenquest"));
  try {
    const questionnaires = await api.listQuestionnaires();
    container.append(renderPicker(questionnaires, prefix));
  } catch (error) {
    container.append(
      errorBanner(error instanceof Error ? error.message : String(error), () =>
        renderHome(prefix),
      ),
    );
  }
}

function renderPicker(questionnaires: QuestionnaireSummary[], prefix: string): HTMLElement {
  const list = el("ul", undefined, "questionnaires");
  for (const q of questionnaires) {
    const item = el("li");
    const link = el("a", `${q.condition} (${q.n_questions} questions)`);
    link.href = `#${prefix}/${q.id}`;
    item.append(link);
    list.append(item);
  }
  return list;
}

// ---- #/run ---------------------------------------------------------------

function renderRunner(state: RunnerState, flow: RunnerFlow): void {
  const container = clear();
  container.append(el("h1", "Questionnaire"));
  if (state.kind === "loading" || state.kind === "idle") {
    container.append(el("p", "Loading..."));
    return;
  }
  if (state.kind === "error") {
    container.append(errorBanner(state.message, () => void state.retry()));
    return;
  }
  const { answered, cap } = flow.progress();
  container.append(el("p", `Question ${Math.min(answered + 1, cap)} of at most ${cap}`, "progress"));
  const session = state.session;
  if (state.kind === "question") {
    window.location.hash = `#/run/${session.questionnaire_id}/${session.session_id}`;
    container.append(el("h2", session.question!.text));
    const controls = el("div", undefined, "controls");
    controls.append(button("Yes", () => void flow.answer("yes")));
    controls.append(button("No", () => void flow.answer("no")));
    container.append(controls);
    return;
  }
  // terminal: show the served probability verbatim; no back controls
  const pct = (session.probability! * 100).toFixed(0);
  container.append(el("h2", "Done"));
  container.append(
    el("p", `${pct}% of similar respondents were in the ${session.questionnaire_id} group.`),
  );
  container.append(
    el(
      "p",
      "This is a screening aid, not a diagnosis. If your answers reflect " +
        "ongoing symptoms, see a doctor to discuss them.",
    ),
  );
  const again = el("a", "Start over");
  again.href = `#/run/${session.questionnaire_id}`;
  container.append(again);
}

async function routeRun(parts: string[]): Promise<void> {
  if (parts.length === 0) return renderHome("/run");
  const flow: RunnerFlow = new RunnerFlow(api, (state) => renderRunner(state, flow));
  if (parts.length === 1) await flow.start(parts[0]);
  else await flow.resume(parts[1]);
}

// ---- #/score -------------------------------------------------------------

function renderScoring(state: ScoringState, flow: ScoringFlow, qid: string): void {
  const container = clear();
  container.append(el("h1", "Path scoring"));
  if (state.kind === "loading" || state.kind === "idle") {
    container.append(el("p", "Loading..."));
    return;
  }
  if (state.kind === "error") {
    container.append(errorBanner(state.message, null));
    container.append(scoringForm(qid, flow));
    return;
  }
  if (state.kind === "report") {
    const report = state.payload.report;
    container.append(el("h2", `Validation: ${report.condition}`));
    const table = el("table");
    const head = el("tr");
    for (const column of ["rater", "scored", "NEI", "correlation", "reliability"]) {
      head.append(el("th", column));
    }
    table.append(head);
    for (const rater of report.raters) {
      const row = el("tr");
      row.append(el("td", rater.rater));
      row.append(el("td", String(rater.n_scored)));
      row.append(el("td", String(rater.n_not_enough_info)));
      row.append(el("td", rater.correlation === null ? "" : rater.correlation.toFixed(2)));
      row.append(el("td", rater.reliability === null ? "" : rater.reliability.toFixed(2)));
      table.append(row);
    }
    container.append(table);
    const avg = report.average_correlation;
    const rel = report.average_reliability;
    container.append(
      el("p", `Average correlation ${avg === null ? "n/a" : avg.toFixed(2)}, ` +
        `average reliability ${rel === null ? "n/a" : rel.toFixed(2)}.`),
    );
    return;
  }
  if (state.error) container.append(errorBanner(state.error, null));
  if (state.submitted) {
    container.append(el("p", "Scores submitted.", "submitted"));
    container.append(button("View report", () => void flow.report(qid, state.sheet.seed)));
  }
  container.append(
    el("p", `Rate each path: would a patient answering this way need to see a doctor? ` +
      `1 (no) to 5 (urgently), or "Not enough information".`),
  );
  const done = Math.round(flow.completion() * 100);
  container.append(el("p", `Completed: ${done}%`, "completion"));
  const list = el("ol", undefined, "items");
  for (const item of flow.items()) {
    const entry = el("li");
    const chain = el("p", item.steps.map((s) => `${s.question} ${s.answer}.`).join(" "));
    entry.append(chain);
    const controls = el("div", undefined, "controls");
    for (const choice of SCORE_CHOICES) {
      const label = choice === "NEI" ? "Not enough information" : String(choice);
      const pick = button(label, () => flow.setScore(item.itemId, choice));
      if (item.score === choice) pick.classList.add("selected");
      controls.append(pick);
    }
    entry.append(controls);
    list.append(entry);
  }
  container.append(list);
  container.append(button("Submit scores", () => void flow.submit()));
}

function scoringForm(qid: string, flow: ScoringFlow): HTMLElement {
  const form = el("div", undefined, "scoring-form");
  const rater = el("input");
  rater.placeholder = "rater id";
  const seed = el("input");
  seed.placeholder = "sheet seed";
  const token = el("input");
  token.placeholder = "rater token (if required)";
  token.value = api.raterToken ?? "";
  form.append(rater, seed, token);
  form.append(
    button("Load sheet", () => {
      api.raterToken = token.value || null;
      if (token.value) sessionStorage.setItem("rater_token", token.value);
      void flow.load(qid, rater.value, Number(seed.value));
    }),
  );
  return form;
}

async function routeScore(parts: string[]): Promise<void> {
  if (parts.length === 0) return renderHome("/score");
  const qid = parts[0];
  const flow: ScoringFlow = new ScoringFlow(api, (state) => renderScoring(state, flow, qid));
  const container = clear();
  container.append(el("h1", "Path scoring"));
  container.append(scoringForm(qid, flow));
}

// ---- router --------------------------------------------------------------

function route(): void {
  const parts = window.location.hash.replace(/^#\/?/, "").split("/").filter(Boolean);
  if (parts[0] === "run") void routeRun(parts.slice(1));
  else if (parts[0] === "score") void routeScore(parts.slice(1));
  else void renderHome("/run");
}

window.addEventListener("hashchange", () => {
  // runner screens update the hash themselves; only re-route on real moves
  const parts = window.location.hash.split("/");
  if (parts[1] === "run" && parts.length === 4) return;
  route();
});
route();

export { MAX_QUESTIONS };
