/** State behind the #/score rater workbench.
 *
 * Items render exactly as the sheet payload lists them: the view model
 * carries only the item id, the question/answer chain, and the rater's
 * pending score, so repeated paths look identical to their first
 * showing. Scores are kept verbatim (1-5 as numbers, the
 * not-enough-information literal as the string "NEI") and submitted
 * unchanged.
 */

import { ApiClient, ReportPayload, Score, Sheet, SheetItem } from "./api.js";

export const NEI = "NEI" as const;
export const SCORE_CHOICES: Score[] = [1, 2, 3, 4, 5, NEI];

export interface ItemView {
  itemId: string;
  steps: { question: string; answer: string }[];
  score: Score | null;
}

/** What the scoring page shows for one sheet item. Deliberately drops
 * every field except the id and the rendered path. */
export function itemView(item: SheetItem, score: Score | null): ItemView {
  return {
    itemId: item.item_id,
    steps: item.steps.map((s) => ({ question: s.question, answer: s.answer })),
    score,
  };
}

export type ScoringState =
  | { kind: "idle" }
  | { kind: "loading" }
  | { kind: "sheet"; sheet: Sheet; error: string | null; submitted: boolean }
  | { kind: "report"; payload: ReportPayload }
  | { kind: "error"; message: string };

export class ScoringFlow {
  state: ScoringState = { kind: "idle" };
  private scores = new Map<string, Score>();

  constructor(
    private api: ApiClient,
    private onChange: (state: ScoringState) => void = () => {},
  ) {}

  private set(state: ScoringState): void {
    this.state = state;
    this.onChange(this.state);
  }

  async load(questionnaireId: string, rater: string, seed: number): Promise<void> {
    this.set({ kind: "loading" });
    this.scores.clear();
    try {
      const sheet = await this.api.getSheet(questionnaireId, rater, seed);
      this.set({ kind: "sheet", sheet, error: null, submitted: false });
    } catch (error) {
      this.set({ kind: "error", message: error instanceof Error ? error.message : String(error) });
    }
  }

  setScore(itemId: string, score: Score): void {
    if (this.state.kind !== "sheet") throw new Error("no sheet loaded");
    this.scores.set(itemId, score);
    this.set({ ...this.state });
  }

  items(): ItemView[] {
    if (this.state.kind !== "sheet") return [];
    return this.state.sheet.items.map((item) =>
      itemView(item, this.scores.get(item.item_id) ?? null),
    );
  }

  /** Fraction of items scored, for the completion indicator. */
  completion(): number {
    if (this.state.kind !== "sheet" || this.state.sheet.items.length === 0) return 0;
    const done = this.state.sheet.items.filter((i) => this.scores.has(i.item_id)).length;
    return done / this.state.sheet.items.length;
  }

  /** Submit every entered score as-is. A rejected submission (e.g. 422)
   * keeps the sheet on screen with the service's reason shown inline. */
  async submit(): Promise<void> {
    if (this.state.kind !== "sheet") throw new Error("no sheet loaded");
    const { sheet } = this.state;
    const entries = sheet.items
      .filter((item) => this.scores.has(item.item_id))
      .map((item) => ({ item_id: item.item_id, score: this.scores.get(item.item_id)! }));
    try {
      await this.api.submitScores(sheet.questionnaire_id, sheet.rater, sheet.seed, entries);
      this.set({ kind: "sheet", sheet, error: null, submitted: true });
    } catch (error) {
      const message = error instanceof Error ? error.message : String(error);
      this.set({ kind: "sheet", sheet, error: message, submitted: false });
    }
  }

  async report(questionnaireId: string, seed?: number): Promise<void> {
    this.set({ kind: "loading" });
    try {
      this.set({ kind: "report", payload: await this.api.getReport(questionnaireId, seed) });
    } catch (error) {
      this.set({ kind: "error", message: error instanceof Error ? error.message : String(error) });
    }
  }
}
