/** State machine behind the #/run questionnaire walkthrough.
 *
 * The flow holds nothing but the latest session payload from the API;
 * it never walks the tree or computes probabilities itself. Every user
 * action is one round-trip, and a failed round-trip parks the flow in
 * an error state whose `retry` re-issues the same request.
 */

import { ApiClient, SessionState } from "./api.js";

export const MAX_QUESTIONS = 6;

export type RunnerState =
  | { kind: "idle" }
  | { kind: "loading" }
  | { kind: "question"; session: SessionState }
  | { kind: "terminal"; session: SessionState }
  | { kind: "error"; message: string; retry: () => Promise<void> };

export class RunnerFlow {
  state: RunnerState = { kind: "idle" };

  constructor(
    private api: ApiClient,
    private onChange: (state: RunnerState) => void = () => {},
  ) {}

  private set(state: RunnerState): void {
    this.state = state;
    this.onChange(this.state);
  }

  private settle(session: SessionState): void {
    this.set(session.terminal ? { kind: "terminal", session } : { kind: "question", session });
  }

  private async attempt(action: () => Promise<SessionState>): Promise<void> {
    this.set({ kind: "loading" });
    try {
      this.settle(await action());
    } catch (error) {
      this.set({
        kind: "error",
        message: error instanceof Error ? error.message : String(error),
        retry: () => this.attempt(action),
      });
    }
  }

  start(questionnaireId: string): Promise<void> {
    return this.attempt(() => this.api.startSession(questionnaireId));
  }

  /** Rehydrate from a session id (page refresh, shared link). */
  resume(sessionId: string): Promise<void> {
    return this.attempt(() => this.api.getSession(sessionId));
  }

  /** Answer the question currently on screen. Refuses to fire unless a
   * question is showing, so a terminal screen cannot be answered past. */
  answer(answer: "yes" | "no"): Promise<void> {
    if (this.state.kind !== "question") {
      throw new Error(`cannot answer in state ${this.state.kind}`);
    }
    const { session } = this.state;
    return this.attempt(() => this.api.answer(session.session_id, answer, session.step));
  }

  /** Progress through the walkthrough as "answered / cap" counts. */
  progress(): { answered: number; cap: number } {
    const session =
      this.state.kind === "question" || this.state.kind === "terminal"
        ? this.state.session
        : null;
    return { answered: session ? session.step : 0, cap: MAX_QUESTIONS };
  }
}
