// State machine for the live strength meter: debounced estimate pairs
// (seeded + baseline), stale-response discarding, and the delta
// indicator. Views carry only the password length, never the string.

import { DpSettings, Estimate, MeterApi, SeedCreated } from "./api.js";
import { debounce, Debounced } from "./debounce.js";

export const LABEL_ORDER = ["weak", "fair", "strong", "very strong"] as const;

export type Delta = "downgrade" | "upgrade" | "same";

export interface EstimateView {
  status: "neutral" | "pending" | "ready" | "error";
  passwordLength: number;
  seeded: Estimate | null;
  baseline: Estimate | null;
  delta: Delta | null;
  message?: string;
}

export const NEUTRAL_VIEW: EstimateView = {
  status: "neutral",
  passwordLength: 0,
  seeded: null,
  baseline: null,
  delta: null,
};

function labelRank(label: string): number {
  const i = LABEL_ORDER.indexOf(label as (typeof LABEL_ORDER)[number]);
  return i < 0 ? LABEL_ORDER.length : i;
}

export function deltaOf(seeded: Estimate, baseline: Estimate): Delta {
  const s = labelRank(seeded.strength_label);
  const b = labelRank(baseline.strength_label);
  if (s < b) return "downgrade"; // the community view says it's weaker
  if (s > b) return "upgrade";
  return "same";
}

export interface MeterOptions {
  api: MeterApi;
  render: (view: EstimateView) => void;
  debounceMs?: number;
}

export class MeterController {
  private seedId: string | null = null;
  private requestToken = 0;
  private readonly fire: Debounced<[string]>;
  private readonly render: (view: EstimateView) => void;
  private readonly api: MeterApi;

  constructor(options: MeterOptions) {
    this.api = options.api;
    this.render = options.render;
    this.fire = debounce(
      (password: string) => void this.issue(password),
      options.debounceMs ?? 200
    );
    this.render(NEUTRAL_VIEW);
  }

  selectSeed(seedId: string): void {
    this.seedId = seedId;
    this.requestToken += 1; // in-flight answers for the old seed are stale
  }

  input(password: string): void {
    if (this.seedId === null) return;
    if (password.length === 0) {
      this.fire.cancel();
      this.requestToken += 1;
      this.render(NEUTRAL_VIEW);
      return;
    }
    this.fire(password);
  }

  private async issue(password: string): Promise<void> {
    const seedId = this.seedId;
    if (seedId === null) return;
    const token = ++this.requestToken;
    this.render({
      status: "pending",
      passwordLength: password.length,
      seeded: null,
      baseline: null,
      delta: null,
    });
    try {
      const [seeded, baseline] = await Promise.all([
        this.api.estimate(seedId, password),
        this.api.estimate("baseline", password),
      ]);
      if (token !== this.requestToken) return; // stale: a newer input won
      this.render({
        status: "ready",
        passwordLength: password.length,
        seeded,
        baseline,
        delta: deltaOf(seeded, baseline),
      });
    } catch (err) {
      if (token !== this.requestToken) return;
      this.render({
        status: "error",
        passwordLength: password.length,
        seeded: null,
        baseline: null,
        delta: null,
        message: err instanceof Error ? err.message : String(err),
      });
    }
  }

  async createSeed(
    emails: string[],
    dp?: DpSettings,
    k?: number
  ): Promise<SeedCreated> {
    const created = await this.api.createSeed(emails, k, dp);
    this.selectSeed(created.seed_id);
    return created;
  }
}
