/**
 * Pure view-model builders for the profile screen. No risk logic here:
 * every status, rule id, and score is taken verbatim from API responses.
 */

import { Profile, Risk } from "./api.js";

export type RiskStatus = "flagged" | "excluded" | "undetermined";

export interface ProfileEntry {
  risk: Risk;
  status: RiskStatus;
  ruleIds: string[];
  conflicted: boolean;
}

export interface CategoryGroup {
  category: string;
  entries: ProfileEntry[];
}

export interface ProfileView {
  tier: string;
  tierRuleIds: string[];
  partial: boolean;
  generatedAt: string;
  groups: CategoryGroup[];
  flaggedIds: string[];
  excludedIds: string[];
}

const CATEGORY_ORDER = ["training-data", "inference", "output", "non-technical", "agentic"];

export function buildProfileView(profile: Profile, risks: Risk[]): ProfileView {
  const byId = new Map(risks.map((r) => [r.id, r]));
  const groups = new Map<string, ProfileEntry[]>();
  const flaggedIds: string[] = [];
  const excludedIds: string[] = [];

  const ids = Object.keys(profile.statuses).sort();
  for (const riskId of ids) {
    const risk = byId.get(riskId);
    if (!risk) continue; // risk outside the loaded catalog scope
    const status = profile.statuses[riskId] as RiskStatus;
    if (status === "flagged") flaggedIds.push(riskId);
    if (status === "excluded") excludedIds.push(riskId);
    const entry: ProfileEntry = {
      risk,
      status,
      ruleIds: profile.triggering_rules[riskId] ?? [],
      conflicted: riskId in profile.conflicts,
    };
    const bucket = groups.get(risk.category);
    if (bucket) bucket.push(entry);
    else groups.set(risk.category, [entry]);
  }

  const orderedGroups: CategoryGroup[] = [];
  const seen = new Set<string>();
  for (const category of [...CATEGORY_ORDER, ...groups.keys()]) {
    if (seen.has(category) || !groups.has(category)) continue;
    seen.add(category);
    const entries = groups.get(category)!;
    // flagged first, then excluded, then undetermined; stable by id within
    const rank: Record<RiskStatus, number> = { flagged: 0, excluded: 1, undetermined: 2 };
    entries.sort((a, b) => rank[a.status] - rank[b.status] || a.risk.id.localeCompare(b.risk.id));
    orderedGroups.push({ category, entries });
  }

  return {
    tier: profile.tier,
    tierRuleIds: profile.tier_rule_ids,
    partial: profile.partial,
    generatedAt: profile.generated_at,
    groups: orderedGroups,
    flaggedIds,
    excludedIds,
  };
}

/** Serialize the profile for the export button: exactly the API payload. */
export function profileExportBlob(profile: Profile): string {
  return JSON.stringify(profile, null, 2);
}
