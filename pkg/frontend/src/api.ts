/**
 * Typed client for the approval/audit API.
 *
 * The console consumes exactly four endpoints: the pending queue, the
 * decision submission, the audit chain view, and health. It holds no
 * decision authority of its own; everything rendered is reconstructed
 * from these responses.
 */

export interface PendingRequest {
  requestId: string;
  op: string;
  target: string;
  reasoning: string;
  originSkillId: string;
  originLevel: string | null;
  secondsRemaining: number;
}

export interface AuditRecordView {
  seq: number;
  recordType: string;
  requestId: string | null;
  payload: Record<string, unknown>;
  prevHash: string;
  selfHash: string;
}

export interface AuditResponse {
  records: AuditRecordView[];
  chainOk: boolean;
  brokenAt: number | null;
  total: number;
}

export interface HealthResponse {
  status: string;
  profile: string;
  halted: boolean;
  records: number;
}

export type Decision = "approve" | "deny";

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

export class ConsoleApi {
  constructor(
    private baseUrl: string,
    private fetchFn: typeof fetch = fetch,
  ) {}

  private async get<T>(path: string): Promise<T> {
    const resp = await this.fetchFn(`${this.baseUrl}${path}`);
    if (!resp.ok) {
      throw new ApiError(resp.status, `GET ${path} failed: ${resp.status}`);
    }
    return (await resp.json()) as T;
  }

  async health(): Promise<HealthResponse> {
    return this.get<HealthResponse>("/v1/health");
  }

  async pending(): Promise<PendingRequest[]> {
    const body = await this.get<{ pending: PendingRequest[] }>("/v1/pending");
    return body.pending;
  }

  async audit(fromSeq = 0): Promise<AuditResponse> {
    return this.get<AuditResponse>(`/v1/audit?from=${fromSeq}`);
  }

  /**
   * Submit a decision. 409 means someone (or the timeout) decided first;
   * callers surface that rather than retrying.
   */
  async decide(requestId: string, decision: Decision): Promise<void> {
    const resp = await this.fetchFn(
      `${this.baseUrl}/v1/decisions/${encodeURIComponent(requestId)}`,
      {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ decision }),
      },
    );
    if (!resp.ok) {
      throw new ApiError(resp.status, `decision rejected: ${resp.status}`);
    }
  }
}
