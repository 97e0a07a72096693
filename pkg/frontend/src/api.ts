// Gateway client. Every mutation carries the dev token; every 4xx/5xx is
// surfaced as a GatewayError whose code the caller can toast.

import type { AuctionView, CreatedAuction } from "./types.js";

export class GatewayError extends Error {
  constructor(public code: string, message: string, public status: number) {
    super(message);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private baseUrl: string,
    private token: string = "dev-token",
    private fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(this.url(path), init);
    const body = await response.json().catch(() => ({}));
    if (!response.ok) {
      const detail = (body as { detail?: { code?: string; message?: string } }).detail;
      throw new GatewayError(detail?.code ?? "Error",
        detail?.message ?? response.statusText, response.status);
    }
    return body as T;
  }

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "content-type": "application/json", "x-dev-token": this.token },
      body: JSON.stringify(body),
    });
  }

  listAuctions(): Promise<{ auctions: AuctionView[] }> {
    return this.request("/auctions");
  }

  getAuction(id: string): Promise<AuctionView> {
    return this.request(`/auctions/${id}`);
  }

  accounts(): Promise<Record<string, string>> {
    return this.request("/accounts");
  }

  chains(): Promise<{ chains: string[] }> {
    return this.request("/chains");
  }

  health(): Promise<{ ok: boolean; now: number }> {
    return this.request("/health");
  }

  createAuction(body: {
    actor: string;
    asset: string;
    accepted_chains: string[];
    rates: Record<string, [number, number]>;
    duration_ms: number;
  }): Promise<CreatedAuction> {
    return this.post("/auctions", body);
  }

  addExisting(ticketContract: string): Promise<AuctionView> {
    return this.post("/auctions/add", { ticket_contract: ticketContract });
  }

  placeBid(id: string, actor: string, chain: string, amount: number) {
    return this.post(`/auctions/${id}/bids`, { actor, chain, amount });
  }

  withdrawBid(id: string, actor: string, chain: string) {
    return this.post(`/auctions/${id}/withdraw`, { actor, chain });
  }

  endAuction(id: string, actor: string) {
    return this.post(`/auctions/${id}/end`, { actor });
  }
}
