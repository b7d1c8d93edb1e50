/**
 * Wizard state machine for a live assessment.
 *
 * Invariants:
 *  - `revision` always mirrors the server's last-acknowledged revision;
 *    the wizard never issues a mutation without sending it as If-Match.
 *  - Question visibility is never computed locally: after every accepted
 *    submission the pending questions come from the server response, so
 *    branching reflects each answer immediately.
 *  - A 409 puts the wizard into `conflict` until reload() refetches the
 *    server state; staged-but-unsubmitted answers survive the reload so
 *    the user can re-apply them.
 */

import { AnswerMap, AnswerValue, ApiClient, ApiError, Profile, Question } from "./api.js";

export type WizardPhase = "idle" | "answering" | "complete" | "evaluated";

export class Wizard {
  private readonly api: ApiClient;

  assessmentId: string | null = null;
  revision = 0;
  /** Server-acknowledged answers. */
  answers: AnswerMap = {};
  /** Locally edited, not yet submitted. */
  staged: AnswerMap = {};
  /** Visible-but-unanswered questions, as reported by the server. */
  pending: Question[] = [];
  profile: Profile | null = null;
  conflict = false;

  constructor(api: ApiClient) {
    this.api = api;
  }

  get dirty(): boolean {
    return Object.keys(this.staged).length > 0;
  }

  get phase(): WizardPhase {
    if (this.assessmentId === null) return "idle";
    if (this.profile !== null) return "evaluated";
    return this.pending.length === 0 ? "complete" : "answering";
  }

  async start(useCaseText: string, attrs: Record<string, string>): Promise<void> {
    const record = await this.api.createAssessment(useCaseText, attrs);
    this.assessmentId = record.id;
    this.revision = record.revision;
    this.answers = record.answers;
    this.staged = {};
    this.profile = record.profile;
    this.conflict = false;
    // creation response carries no question list; fetch the live view
    await this.reload();
  }

  /** Resume an existing assessment by id (e.g. from the URL). */
  async resume(assessmentId: string): Promise<void> {
    this.assessmentId = assessmentId;
    this.staged = {};
    await this.reload();
  }

  stage(questionId: string, value: AnswerValue): void {
    this.staged = { ...this.staged, [questionId]: value };
  }

  unstage(questionId: string): void {
    const next = { ...this.staged };
    delete next[questionId];
    this.staged = next;
  }

  /**
   * Submit staged answers under the current revision. Returns true on
   * success; on a revision conflict returns false and flips `conflict`
   * (staged answers are kept). Validation errors propagate as ApiError
   * so the UI can render them inline per question.
   */
  async submit(): Promise<boolean> {
    if (this.assessmentId === null) throw new Error("wizard not started");
    if (!this.dirty) return true;
    try {
      const record = await this.api.submitAnswers(this.assessmentId, this.staged, this.revision);
      this.revision = record.revision;
      this.answers = record.answers;
      this.pending = record.next_questions ?? [];
      this.profile = record.profile;
      this.staged = {};
      this.conflict = false;
      return true;
    } catch (error) {
      if (error instanceof ApiError && error.isRevisionConflict) {
        this.conflict = true;
        return false;
      }
      throw error;
    }
  }

  /** Refetch server state; clears the conflict flag but keeps staged edits. */
  async reload(): Promise<void> {
    if (this.assessmentId === null) throw new Error("wizard not started");
    const record = await this.api.getAssessment(this.assessmentId);
    this.revision = record.revision;
    this.answers = record.answers;
    this.pending = record.next_questions ?? [];
    this.profile = record.profile;
    this.conflict = false;
  }

  /** Evaluate the assessment into a stored profile. Staged edits must be
   * submitted (or discarded) first so the profile matches what the server
   * has acknowledged. */
  async evaluate(): Promise<Profile> {
    if (this.assessmentId === null) throw new Error("wizard not started");
    if (this.dirty) throw new Error("submit or discard staged answers before evaluating");
    try {
      const record = await this.api.evaluate(this.assessmentId, this.revision);
      this.revision = record.revision;
      this.profile = record.profile;
      if (record.profile === null) throw new Error("server returned no profile");
      return record.profile;
    } catch (error) {
      if (error instanceof ApiError && error.isRevisionConflict) {
        this.conflict = true;
      }
      throw error;
    }
  }

  discardStaged(): void {
    this.staged = {};
  }
}
