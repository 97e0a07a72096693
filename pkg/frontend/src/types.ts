// Shapes of the gateway's JSON responses. The client renders these as-is:
// winners, phases, and the highest-bid flag are decided server-side.

export type Ratio = [number, number];

export interface BidRow {
  bidder: string;
  chain: string;
  amount: number;
  normalized: Ratio;
  log_seq: number;
  highest: boolean;
}

export interface ContractInfo {
  address: string;
  phase: string;
}

export interface Conclusion {
  kind: "commit" | "abort";
  offset: number;
}

export interface AuctionView {
  auction_id: string;
  asset: string;
  ticket_chain: string;
  accepted_chains: string[];
  rates: Record<string, Ratio>;
  created_at: number;
  ends_at: number;
  now: number;
  status: "open" | "ended" | "committed" | "aborted";
  auctioneer: { name: string; account: string };
  bids: BidRow[];
  contracts: Record<string, ContractInfo>;
  conclusion: Conclusion | null;
  ticket_owner: string | null;
}

export interface CreatedAuction {
  auction_id: string;
  ticket_contract: string;
  contracts: Record<string, string>;
  ends_at: number;
}

export interface ApiError {
  code: string;
  message: string;
}

export interface CreateFormFields {
  actor: string;
  asset: string;
  acceptedChains: string[];
  rates: Record<string, { num: string; den: string }>;
  durationMs: number;
}
