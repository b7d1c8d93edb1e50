/**
 * DOM wiring for the workbench. All state lives in the Wizard and the
 * API responses; this file only renders and forwards user input.
 *
 * Screens: intake -> question batches (live branching) -> profile review
 * with what-if prioritization and exports.
 */

import { AnswerValue, ApiClient, ApiError, Question, Risk } from "./api.js";
import { resolveBaseUrl } from "./config.js";
import { buildProfileView, profileExportBlob } from "./profileView.js";
import { Wizard } from "./wizard.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  ...children: Array<Node | string>
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (key === "class") node.className = value;
    else node.setAttribute(key, value);
  }
  node.append(...children);
  return node;
}

function download(filename: string, text: string, mime: string): void {
  const url = URL.createObjectURL(new Blob([text], { type: mime }));
  const anchor = el("a", { href: url, download: filename });
  anchor.click();
  URL.revokeObjectURL(url);
}

export class App {
  private readonly api: ApiClient;
  private readonly wizard: Wizard;
  private readonly root: HTMLElement;
  private risks: Risk[] = [];
  private inlineErrors: Record<string, string> = {};

  constructor(root: HTMLElement, api: ApiClient) {
    this.root = root;
    this.api = api;
    this.wizard = new Wizard(api);
  }

  async boot(): Promise<void> {
    const { risks } = await this.api.listRisks();
    this.risks = risks;
    const resumeId = new URLSearchParams(location.search).get("assessment");
    if (resumeId) {
      await this.wizard.resume(resumeId);
    }
    this.render();
  }

  private setAssessmentUrl(): void {
    if (!this.wizard.assessmentId) return;
    const params = new URLSearchParams(location.search);
    params.set("assessment", this.wizard.assessmentId);
    history.replaceState(null, "", `${location.pathname}?${params}`);
  }

  private render(): void {
    this.root.replaceChildren();
    if (this.wizard.conflict) {
      this.root.append(this.renderConflictBanner());
    }
    switch (this.wizard.phase) {
      case "idle":
        this.root.append(this.renderIntake());
        break;
      case "answering":
        this.root.append(this.renderQuestions());
        break;
      case "complete":
        this.root.append(this.renderEvaluatePrompt());
        break;
      case "evaluated":
        this.root.append(this.renderProfile());
        break;
    }
  }

  private renderConflictBanner(): HTMLElement {
    const reload = el("button", {}, "Reload latest from server");
    reload.onclick = async () => {
      await this.wizard.reload();
      this.render();
    };
    return el(
      "div",
      { class: "banner banner-conflict", role: "alert" },
      "Someone else updated this assessment (revision conflict). ",
      "Your unsubmitted answers are kept and can be re-applied after reloading. ",
      reload,
    );
  }

  private renderIntake(): HTMLElement {
    const useCase = el("textarea", {
      rows: "4",
      placeholder: "Describe the AI use case in a few sentences…",
    });
    const domain = el("input", { placeholder: "domain (e.g. employment)" });
    const fn = el("input", { placeholder: "function (e.g. candidate-screening)" });
    const start = el("button", { class: "primary" }, "Start assessment");
    start.onclick = async () => {
      const attrs: Record<string, string> = {};
      if (domain.value.trim()) attrs.domain = domain.value.trim();
      if (fn.value.trim()) attrs.function = fn.value.trim();
      await this.wizard.start(useCase.value, attrs);
      this.setAssessmentUrl();
      this.render();
    };
    return el(
      "section",
      { class: "card" },
      el("h2", {}, "New assessment"),
      el("label", {}, "Use case", useCase),
      el("label", {}, "Attributes", domain, fn),
      start,
    );
  }

  private questionInput(question: Question): HTMLElement {
    const name = `q-${question.id}`;
    const stage = (value: AnswerValue) => this.wizard.stage(question.id, value);
    switch (question.kind) {
      case "boolean": {
        const wrap = el("div", { class: "choices" });
        for (const value of ["yes", "no"]) {
          const radio = el("input", { type: "radio", name, value });
          radio.onchange = () => stage(value);
          wrap.append(el("label", { class: "choice" }, radio, value));
        }
        return wrap;
      }
      case "single-choice": {
        const wrap = el("div", { class: "choices" });
        for (const option of question.options) {
          const radio = el("input", { type: "radio", name, value: option.value });
          radio.onchange = () => stage(option.value);
          wrap.append(el("label", { class: "choice" }, radio, option.label));
        }
        return wrap;
      }
      case "multi-choice": {
        const wrap = el("div", { class: "choices" });
        const selected = new Set<string>();
        for (const option of question.options) {
          const box = el("input", { type: "checkbox", value: option.value });
          box.onchange = () => {
            if (box.checked) selected.add(option.value);
            else selected.delete(option.value);
            stage([...selected].sort());
          };
          wrap.append(el("label", { class: "choice" }, box, option.label));
        }
        return wrap;
      }
      case "free-text": {
        const input = el("textarea", { rows: "2" });
        input.oninput = () => stage(input.value);
        return input;
      }
    }
  }

  private renderQuestions(): HTMLElement {
    const form = el("section", { class: "card" }, el("h2", {}, "Questions"));
    for (const question of this.wizard.pending) {
      const block = el(
        "div",
        { class: "question" },
        el("p", { class: "question-text" }, question.text),
        this.questionInput(question),
      );
      const message = this.inlineErrors[question.id];
      if (message) {
        block.append(el("p", { class: "error", role: "alert" }, message));
      }
      form.append(block);
    }
    const submit = el("button", { class: "primary" }, "Submit answers");
    submit.onclick = async () => {
      this.inlineErrors = {};
      try {
        await this.wizard.submit();
      } catch (error) {
        if (error instanceof ApiError && error.code === "invalid_answers") {
          for (const detail of error.details as Array<{ question: string; message: string }>) {
            this.inlineErrors[detail.question] = detail.message;
          }
        } else {
          throw error;
        }
      }
      this.render();
    };
    form.append(submit);
    return form;
  }

  private renderEvaluatePrompt(): HTMLElement {
    const button = el("button", { class: "primary" }, "Evaluate risk profile");
    button.onclick = async () => {
      await this.wizard.evaluate();
      this.render();
    };
    return el(
      "section",
      { class: "card" },
      el("h2", {}, "All questions answered"),
      el("p", {}, "Evaluate to produce the stored risk profile."),
      button,
    );
  }

  private renderProfile(): HTMLElement {
    const profile = this.wizard.profile!;
    const view = buildProfileView(profile, this.risks);
    const section = el(
      "section",
      { class: "card" },
      el("h2", {}, "Risk profile"),
      el(
        "p",
        { class: "tier" },
        `Tier: ${view.tier}`,
        view.tierRuleIds.length ? ` (rules: ${view.tierRuleIds.join(", ")})` : "",
        view.partial ? " — partial answers" : "",
      ),
    );

    for (const group of view.groups) {
      const list = el("ul", { class: "risk-list" });
      for (const entry of group.entries) {
        if (entry.status === "undetermined") continue;
        const item = el(
          "li",
          { class: `risk risk-${entry.status}` },
          el("strong", {}, entry.risk.name),
          ` — ${entry.status}`,
          entry.conflicted ? " (conflicting rules; flag kept)" : "",
          el("div", { class: "rules" }, `rules: ${entry.ruleIds.join(", ") || "—"}`),
        );
        const relatedButton = el("button", { class: "small" }, "related risks");
        relatedButton.onclick = async () => {
          const { related } = await this.api.related(entry.risk.id);
          download(
            `${entry.risk.id}-related.json`,
            JSON.stringify(related, null, 2),
            "application/json",
          );
        };
        const mitigationsButton = el("button", { class: "small" }, "mitigations");
        mitigationsButton.onclick = async () => {
          const found = await this.api.mitigations(entry.risk.id, true);
          download(
            `${entry.risk.id}-mitigations.json`,
            JSON.stringify(found, null, 2),
            "application/json",
          );
        };
        item.append(relatedButton, mitigationsButton);
        list.append(item);
      }
      if (list.childElementCount > 0) {
        section.append(el("h3", {}, group.category), list);
      }
    }

    const exportProfile = el("button", {}, "Export profile JSON");
    exportProfile.onclick = () =>
      download("profile.json", profileExportBlob(profile), "application/json");
    section.append(el("div", { class: "actions" }, exportProfile));
    section.append(this.renderWhatIf());
    return section;
  }

  /** What-if panel: re-ranks with edited text; never touches the record. */
  private renderWhatIf(): HTMLElement {
    const text = el("textarea", { rows: "3", placeholder: "Edit the use-case text…" });
    const results = el("ol", { class: "ranked" });
    const run = el("button", {}, "Re-rank (does not save)");
    run.onclick = async () => {
      const { ranked, warnings } = await this.api.prioritize(text.value, 10);
      results.replaceChildren(
        ...ranked.map((entry) =>
          el("li", {}, `${entry.risk_id} — ${entry.score.toFixed(4)} (${entry.method})`),
        ),
        ...warnings.map((warning) => el("li", { class: "warning" }, warning)),
      );
    };
    return el(
      "div",
      { class: "what-if" },
      el("h3", {}, "What-if prioritization"),
      text,
      run,
      results,
    );
  }
}

export function mount(): void {
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app element");
  const api = new ApiClient(resolveBaseUrl());
  new App(root, api).boot().catch((error) => {
    root.replaceChildren(
      el("div", { class: "banner banner-error", role: "alert" }, String(error)),
    );
  });
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  mount();
}
