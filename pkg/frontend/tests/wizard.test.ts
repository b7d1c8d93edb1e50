import { beforeEach, describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";
import { Wizard } from "../src/wizard.js";
import { FakeService } from "./fakeService.js";

const BASE = "http://service.test";

describe("wizard flow", () => {
  let service: FakeService;
  let api: ApiClient;
  let wizard: Wizard;

  beforeEach(() => {
    service = new FakeService();
    api = new ApiClient(BASE, service.fetch);
    wizard = new Wizard(api);
  });

  it("starts an assessment and shows only initially visible questions", async () => {
    await wizard.start("a hiring assistant", { domain: "employment" });
    expect(wizard.assessmentId).not.toBeNull();
    expect(wizard.revision).toBe(1);
    expect(wizard.phase).toBe("answering");
    // q2 is hidden until q1=yes: branching is server-owned
    expect(wizard.pending.map((q) => q.id)).toEqual(["q1", "q3"]);
  });

  it("answering q1=yes reveals q2 without any local visibility logic", async () => {
    await wizard.start("demo", {});
    wizard.stage("q1", "yes");
    expect(wizard.dirty).toBe(true);
    expect(await wizard.submit()).toBe(true);
    expect(wizard.revision).toBe(2);
    expect(wizard.dirty).toBe(false);
    expect(wizard.pending.map((q) => q.id)).toEqual(["q2", "q3"]);
  });

  it("completes, evaluates, and exposes the stored profile", async () => {
    await wizard.start("demo", { domain: "employment", function: "candidate-screening" });
    wizard.stage("q1", "yes");
    await wizard.submit();
    wizard.stage("q2", ["biometric"]);
    wizard.stage("q3", "nothing");
    await wizard.submit();
    expect(wizard.phase).toBe("complete");

    const profile = await wizard.evaluate();
    expect(wizard.phase).toBe("evaluated");
    expect(profile.tier).toBe("high_risk");
    expect(profile.tier_rule_ids).toEqual(["tier-employment-screening"]);
    expect(profile.statuses["r-reidentification"]).toBe("flagged");
    expect(profile.partial).toBe(false);
    // profile fetched later matches what evaluate returned
    expect(await api.getProfile(wizard.assessmentId!)).toEqual(profile);
  });

  it("never issues a mutation without If-Match", async () => {
    await wizard.start("demo", {});
    wizard.stage("q1", "no");
    await wizard.submit();
    wizard.stage("q3", "x");
    await wizard.submit();
    await wizard.evaluate();
    expect(service.mutationsWithoutIfMatch).toBe(0);
  });

  it("surfaces validation errors per question without bumping revision", async () => {
    await wizard.start("demo", {});
    wizard.stage("q1", "maybe");
    let caught: ApiError | null = null;
    try {
      await wizard.submit();
    } catch (error) {
      caught = error as ApiError;
    }
    expect(caught).toBeInstanceOf(ApiError);
    expect(caught!.status).toBe(422);
    expect(caught!.code).toBe("invalid_answers");
    expect(caught!.details).toEqual([{ question: "q1", message: "expected 'yes' or 'no'" }]);
    expect(wizard.revision).toBe(1);
    expect(wizard.staged).toEqual({ q1: "maybe" }); // kept for correction
  });

  it("handles a revision conflict with reload-and-retry, keeping staged edits", async () => {
    await wizard.start("demo", {});
    const rival = new Wizard(api);
    await rival.resume(wizard.assessmentId!);

    rival.stage("q1", "yes");
    expect(await rival.submit()).toBe(true);

    wizard.stage("q3", "my note");
    expect(await wizard.submit()).toBe(false); // exactly the 409 path
    expect(wizard.conflict).toBe(true);
    expect(wizard.staged).toEqual({ q3: "my note" });

    await wizard.reload();
    expect(wizard.conflict).toBe(false);
    expect(wizard.revision).toBe(2);
    expect(wizard.answers).toEqual({ q1: "yes" }); // rival's answer visible after reload
    expect(await wizard.submit()).toBe(true); // staged edit re-applies cleanly
    expect(wizard.answers["q3"]).toBe("my note");
  });

  it("refuses to evaluate with unsubmitted staged answers", async () => {
    await wizard.start("demo", {});
    wizard.stage("q1", "no");
    await expect(wizard.evaluate()).rejects.toThrow(/staged answers/);
    wizard.discardStaged();
    expect(wizard.dirty).toBe(false);
  });

  it("resumes an existing assessment from its id", async () => {
    await wizard.start("demo", {});
    wizard.stage("q1", "no");
    await wizard.submit();

    const later = new Wizard(api);
    await later.resume(wizard.assessmentId!);
    expect(later.revision).toBe(2);
    expect(later.answers).toEqual({ q1: "no" });
    expect(later.pending.map((q) => q.id)).toEqual(["q3"]);
  });

  it("what-if prioritization changes rankings without changing the stored revision", async () => {
    await wizard.start("demo", {});
    wizard.stage("q1", "no");
    await wizard.submit();
    const revisionBefore = wizard.revision;

    const first = await api.prioritize("an agent that drifts", 4);
    const second = await api.prioritize("prompt tricks from users", 4);
    expect(first.ranked[0]!.risk_id).toBe("r-agent-drift");
    expect(second.ranked[0]!.risk_id).toBe("r-prompt-injection");
    expect(first.ranked.map((r) => r.risk_id)).not.toEqual(second.ranked.map((r) => r.risk_id));

    const record = await api.getAssessment(wizard.assessmentId!);
    expect(record.revision).toBe(revisionBefore);
    expect(record.answers).toEqual({ q1: "no" });
    expect(service.prioritizeCalls).toBe(2);
  });
});
