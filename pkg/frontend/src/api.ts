// JSON client for the strength-meter service. Passwords travel only in
// the body of the estimate endpoint, nowhere else.

export interface Estimate {
  seed_id: string;
  log10_guess_number: number | null;
  log2_prob: number | null;
  strength_label: string;
  outside_key_space: boolean;
}

export interface SeedCreated {
  seed_id: string;
  k_used: number;
  epsilon?: number;
}

export interface SeedInfo {
  seed_id: string;
  k_used: number;
  epsilon?: number;
  created_at: number;
}

export interface DpSettings {
  z: number;
  delta: number;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string
  ) {
    super(`service error ${status}: ${detail}`);
  }
}

export type FetchLike = (
  url: string,
  init?: {
    method?: string;
    headers?: Record<string, string>;
    body?: string;
  }
) => Promise<{ status: number; json(): Promise<unknown> }>;

async function request<T>(
  fetchImpl: FetchLike,
  url: string,
  body?: unknown
): Promise<T> {
  const response = await fetchImpl(url, {
    method: body === undefined ? "GET" : "POST",
    headers: { "content-type": "application/json" },
    body: body === undefined ? undefined : JSON.stringify(body),
  });
  const payload = (await response.json()) as Record<string, unknown>;
  if (response.status >= 400) {
    const detail =
      typeof payload?.detail === "string"
        ? payload.detail
        : JSON.stringify(payload?.detail ?? payload);
    throw new ApiError(response.status, detail);
  }
  return payload as T;
}

export class MeterApi {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = fetch as unknown as FetchLike
  ) {}

  estimate(seedId: string, password: string): Promise<Estimate> {
    return request<Estimate>(this.fetchImpl, `${this.baseUrl}/v1/estimate`, {
      seed_id: seedId,
      password,
    });
  }

  createSeed(
    emails: string[],
    k?: number,
    dp?: DpSettings
  ): Promise<SeedCreated> {
    const body: Record<string, unknown> = { emails };
    if (k !== undefined) body.k = k;
    if (dp !== undefined) body.dp = dp;
    return request<SeedCreated>(this.fetchImpl, `${this.baseUrl}/v1/seeds`, body);
  }

  listSeeds(): Promise<SeedInfo[]> {
    return request<SeedInfo[]>(this.fetchImpl, `${this.baseUrl}/v1/seeds`);
  }
}
