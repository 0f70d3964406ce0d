import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { FetchLike, MeterApi } from "../src/api.js";
import { debounce } from "../src/debounce.js";
import { deltaOf, EstimateView, MeterController } from "../src/meter.js";

interface Call {
  url: string;
  body: Record<string, unknown>;
  resolve: (value: unknown) => void;
  reject: (err: unknown) => void;
}

/** Mock service: records every request and lets tests settle them. */
function mockService() {
  const calls: Call[] = [];
  const fetchImpl: FetchLike = (url, init) => {
    return new Promise((outerResolve) => {
      const body = init?.body ? JSON.parse(init.body) : {};
      calls.push({
        url,
        body,
        resolve: (value) =>
          outerResolve({ status: 200, json: async () => value }),
        reject: (detail) =>
          outerResolve({ status: 422, json: async () => ({ detail }) }),
      });
    });
  };
  return { calls, fetchImpl };
}

function estimate(seedId: string, label: string, log10 = 3.0) {
  return {
    seed_id: seedId,
    log10_guess_number: log10,
    log2_prob: -20,
    strength_label: label,
    outside_key_space: false,
  };
}

function answerPair(calls: Call[], seedLabel: string, baseLabel: string) {
  for (const call of calls) {
    const seedId = call.body.seed_id as string;
    call.resolve(
      seedId === "baseline"
        ? estimate("baseline", baseLabel)
        : estimate(seedId, seedLabel)
    );
  }
}

describe("meter controller", () => {
  let views: EstimateView[];
  let service: ReturnType<typeof mockService>;
  let controller: MeterController;

  beforeEach(() => {
    vi.useFakeTimers();
    views = [];
    service = mockService();
    controller = new MeterController({
      api: new MeterApi("http://svc", service.fetchImpl),
      render: (view) => views.push(view),
    });
    controller.selectSeed("seed01");
  });

  afterEach(() => {
    vi.useRealTimers();
  });

  it("collapses 10 keystrokes inside 200 ms into one request pair", async () => {
    for (let i = 1; i <= 10; i++) {
      controller.input("pass".slice(0, 1 + (i % 4)) + "x".repeat(i));
      vi.advanceTimersByTime(15); // all within one debounce window
    }
    expect(service.calls.length).toBe(0); // nothing fires mid-burst
    vi.advanceTimersByTime(200);
    await Promise.resolve();
    expect(service.calls.length).toBe(2); // exactly one seeded+baseline pair
    const seedIds = service.calls.map((c) => c.body.seed_id).sort();
    expect(seedIds).toEqual(["baseline", "seed01"]);
  });

  it("renders only after both responses arrive", async () => {
    controller.input("hunter2");
    vi.advanceTimersByTime(200);
    await Promise.resolve();
    expect(service.calls.length).toBe(2);
    service.calls[0].resolve(estimate("seed01", "weak"));
    await Promise.resolve();
    expect(views.at(-1)!.status).toBe("pending"); // one answer is not enough
    service.calls[1].resolve(estimate("baseline", "strong"));
    await vi.waitFor(() => {
      expect(views.at(-1)!.status).toBe("ready");
    });
    const view = views.at(-1)!;
    expect(view.seeded!.strength_label).toBe("weak");
    expect(view.baseline!.strength_label).toBe("strong");
    expect(view.delta).toBe("downgrade");
  });

  it("discards stale responses when a newer input supersedes them", async () => {
    controller.input("first");
    vi.advanceTimersByTime(200);
    await Promise.resolve();
    const firstPair = [...service.calls];
    controller.input("second");
    vi.advanceTimersByTime(200);
    await Promise.resolve();
    expect(service.calls.length).toBe(4);
    // answer the SECOND pair first: it must win
    answerPair(service.calls.slice(2), "fair", "fair");
    await vi.waitFor(() => {
      expect(views.at(-1)!.status).toBe("ready");
    });
    expect(views.at(-1)!.passwordLength).toBe("second".length);
    const settled = views.length;
    // late answers for the first input arrive now and must be dropped
    answerPair(firstPair, "very strong", "very strong");
    await Promise.resolve();
    await Promise.resolve();
    expect(views.length).toBe(settled);
    expect(views.at(-1)!.passwordLength).toBe("second".length);
  });

  it("empty input cancels pending work and shows the neutral view", async () => {
    controller.input("something");
    vi.advanceTimersByTime(100);
    controller.input("");
    vi.advanceTimersByTime(500);
    await Promise.resolve();
    expect(service.calls.length).toBe(0);
    expect(views.at(-1)!.status).toBe("neutral");
    expect(views.at(-1)!.passwordLength).toBe(0);
  });

  it("views never contain the password itself", async () => {
    controller.input("supersecret");
    vi.advanceTimersByTime(200);
    await Promise.resolve();
    answerPair(service.calls, "weak", "weak");
    await vi.waitFor(() => expect(views.at(-1)!.status).toBe("ready"));
    for (const view of views) {
      expect(JSON.stringify(view)).not.toContain("supersecret");
    }
  });

  it("service errors surface as inline messages without crashing", async () => {
    controller.input("boom");
    vi.advanceTimersByTime(200);
    await Promise.resolve();
    service.calls[0].reject("password: broken");
    service.calls[1].resolve(estimate("baseline", "fair"));
    await vi.waitFor(() => expect(views.at(-1)!.status).toBe("error"));
    expect(views.at(-1)!.message).toContain("broken");
  });

  it("seed creation returns k_used and epsilon for the dp path", async () => {
    const promise = controller.createSeed(["a@b.pl", "c@d.pl"], {
      z: 3,
      delta: 1e-5,
    });
    await Promise.resolve();
    expect(service.calls.length).toBe(1);
    expect(service.calls[0].url).toBe("http://svc/v1/seeds");
    expect(service.calls[0].body.dp).toEqual({ z: 3, delta: 1e-5 });
    service.calls[0].resolve({ seed_id: "dp01", k_used: 2, epsilon: 0.82 });
    const created = await promise;
    expect(created.epsilon).toBeCloseTo(0.82);
    expect(created.k_used).toBe(2);
    // the new seed becomes the active one
    controller.input("next");
    vi.advanceTimersByTime(200);
    await Promise.resolve();
    const ids = service.calls.slice(1).map((c) => c.body.seed_id);
    expect(ids).toContain("dp01");
  });

  it("seed creation without dp carries no epsilon", async () => {
    const promise = controller.createSeed(["a@b.pl"]);
    await Promise.resolve();
    expect(service.calls[0].body.dp).toBeUndefined();
    service.calls[0].resolve({ seed_id: "plain1", k_used: 1 });
    const created = await promise;
    expect(created.epsilon).toBeUndefined();
  });

  it("seed creation validation errors are surfaced", async () => {
    const promise = controller.createSeed([]);
    await Promise.resolve();
    service.calls[0].reject("emails: no parseable address");
    await expect(promise).rejects.toThrow(/emails/);
  });
});

describe("debounce", () => {
  beforeEach(() => vi.useFakeTimers());
  afterEach(() => vi.useRealTimers());

  it("fires once on the trailing edge with the last arguments", () => {
    const seen: number[] = [];
    const d = debounce((x: number) => seen.push(x), 200);
    d(1);
    d(2);
    d(3);
    vi.advanceTimersByTime(199);
    expect(seen).toEqual([]);
    vi.advanceTimersByTime(1);
    expect(seen).toEqual([3]);
  });

  it("cancel suppresses the pending call", () => {
    const seen: number[] = [];
    const d = debounce((x: number) => seen.push(x), 200);
    d(1);
    d.cancel();
    vi.advanceTimersByTime(500);
    expect(seen).toEqual([]);
  });
});

describe("delta indicator", () => {
  it("flags the community downgrade", () => {
    expect(
      deltaOf(estimate("s", "weak"), estimate("baseline", "very strong"))
    ).toBe("downgrade");
    expect(deltaOf(estimate("s", "strong"), estimate("baseline", "fair"))).toBe(
      "upgrade"
    );
    expect(deltaOf(estimate("s", "fair"), estimate("baseline", "fair"))).toBe(
      "same"
    );
  });
});
