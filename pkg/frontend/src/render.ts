// Pure HTML renderers: gateway state in, markup out. Nothing here computes
// winners or normalized values; the asterisk follows the server's
// highest-bid flag and settlement lines re-read server fields verbatim.

import { escapeHtml, formatCountdown, formatRatio, formatTime, shortId } from "./format.js";
import type { AuctionView, CreateFormFields } from "./types.js";

export function renderDashboard(auctions: AuctionView[]): string {
  const cards = auctions.length === 0
    ? `<p class="empty">No auctions known yet. Create one or add an existing
       auction by its ticket-contract address.</p>`
    : auctions.map(renderCard).join("");
  return `
  <section class="toolbar">
    <button data-action="goto-create">Create New Auction</button>
    <form data-action="add-existing" class="inline">
      <input name="address" placeholder="ticket contract address" size="40" required>
      <button type="submit">Add Existing Auction</button>
    </form>
  </section>
  <section class="cards">${cards}</section>`;
}

function renderCard(view: AuctionView): string {
  const top = view.bids.find((b) => b.highest);
  return `
  <article class="card status-${view.status}">
    <h3>${escapeHtml(view.asset)}</h3>
    <dl>
      <dt>status</dt><dd>${view.status}</dd>
      <dt>bids</dt><dd>${view.bids.length}${top ? ` (top ${top.amount} on ${escapeHtml(top.chain)})` : ""}</dd>
      <dt>ends</dt><dd>${formatTime(view.ends_at)}</dd>
    </dl>
    <button data-action="view" data-id="${view.auction_id}">View</button>
  </article>`;
}

export function renderDetail(view: AuctionView, actor: string,
                             names: Record<string, string>): string {
  const isAuctioneer = actor === view.auctioneer.name;
  const open = view.status === "open";
  const rows = view.bids.map((bid) => `
      <tr class="${bid.highest ? "highest" : ""}">
        <td>${bid.highest ? "*" : ""}</td>
        <td>${escapeHtml(names[bid.bidder] ?? shortId(bid.bidder))}</td>
        <td>${escapeHtml(bid.chain)}</td>
        <td class="num">${bid.amount}</td>
        <td class="num">${formatRatio(bid.normalized)}</td>
      </tr>`).join("");
  const phases = Object.entries(view.contracts).map(([chain, info]) =>
    `<li><code>${escapeHtml(chain)}</code> ${escapeHtml(info.phase)}
        <span class="addr">${shortId(info.address, 14)}</span></li>`).join("");
  return `
  <section class="detail">
    <button data-action="goto-dashboard">← Dashboard</button>
    <h2>${escapeHtml(view.asset)} <span class="status">${view.status}</span></h2>
    <dl class="times">
      <dt>created</dt><dd>${formatTime(view.created_at)}</dd>
      <dt>concludes</dt><dd>${formatTime(view.ends_at)} (${formatCountdown(view.ends_at, view.now)})</dd>
      <dt>auction id</dt><dd><code>${shortId(view.auction_id, 18)}</code></dd>
    </dl>
    <h3>Bids</h3>
    ${view.bids.length === 0 ? `<p class="empty">No bids yet.</p>` : `
    <table class="bids">
      <thead><tr><th></th><th>bidder</th><th>chain</th><th>amount</th><th>value</th></tr></thead>
      <tbody>${rows}</tbody>
    </table>`}
    ${renderBidForm(view, actor, open)}
    ${renderConclusion(view, names)}
    <h3>Contracts</h3>
    <ul class="phases">${phases}</ul>
    ${isAuctioneer && open ? `
    <section class="owner-actions">
      <button data-action="end-auction" data-id="${view.auction_id}">End auction</button>
      <span class="hint">only the auctioneer sees this</span>
    </section>` : ""}
  </section>`;
}

function renderBidForm(view: AuctionView, actor: string, open: boolean): string {
  if (actor === view.auctioneer.name) return "";
  const options = view.accepted_chains.map((chain) =>
    `<option value="${escapeHtml(chain)}">${escapeHtml(chain)}
     (rate ${formatRatio(view.rates[chain] ?? [1, 1])})</option>`).join("");
  return `
  <form data-action="place-bid" data-id="${view.auction_id}" class="bid-form">
    <select name="chain" ${open ? "" : "disabled"}>${options}</select>
    <input name="amount" type="number" min="1" placeholder="amount"
           ${open ? "" : "disabled"} required>
    <button type="submit" ${open ? "" : "disabled"}>Place bid</button>
    <button type="button" data-action="withdraw-bid" data-id="${view.auction_id}"
            ${open ? "" : "disabled"}>Withdraw my bid</button>
    ${open ? "" : `<span class="hint">bidding is closed</span>`}
  </form>`;
}

function renderConclusion(view: AuctionView,
                          names: Record<string, string>): string {
  if (view.status === "committed") {
    const winner = view.bids.find((b) => b.highest);
    const owner = view.ticket_owner
      ? names[view.ticket_owner] ?? shortId(view.ticket_owner) : "?";
    return `
    <section class="conclusion committed">
      <h3>Concluded: committed</h3>
      <ul>
        <li>${escapeHtml(view.asset)} → ${escapeHtml(owner)}</li>
        ${winner ? `<li>${winner.amount} on ${escapeHtml(winner.chain)} →
            ${escapeHtml(view.auctioneer.name)}</li>` : ""}
        <li>all other deposits refunded</li>
      </ul>
    </section>`;
  }
  if (view.status === "aborted") {
    return `
    <section class="conclusion aborted">
      <h3>Concluded: aborted</h3>
      <p>Every escrowed asset returned to its owner.</p>
    </section>`;
  }
  return "";
}

export function renderCreateForm(chains: string[], assets: string[],
                                 actors: string[], fields: CreateFormFields | null,
                                 errors: string[]): string {
  const coinChains = chains.filter((c) => c !== "ticket-chain");
  const rateInputs = coinChains.map((chain) => {
    const rate = fields?.rates[chain] ?? { num: "1", den: "1" };
    const checked = fields ? fields.acceptedChains.includes(chain) : true;
    return `
    <div class="rate-row">
      <label><input type="checkbox" name="chain:${escapeHtml(chain)}"
             ${checked ? "checked" : ""}> ${escapeHtml(chain)}</label>
      rate <input name="num:${escapeHtml(chain)}" size="3" value="${escapeHtml(rate.num)}">
      / <input name="den:${escapeHtml(chain)}" size="3" value="${escapeHtml(rate.den)}">
    </div>`;
  }).join("");
  return `
  <section class="create">
    <button data-action="goto-dashboard">← Dashboard</button>
    <h2>Create New Auction</h2>
    ${errors.length ? `<ul class="errors">${errors.map((e) =>
      `<li>${escapeHtml(e)}</li>`).join("")}</ul>` : ""}
    <form data-action="create-auction">
      <label>service
        <select name="service"><option value="default">default deal service</option></select>
      </label>
      <label>acting as
        <select name="actor">${actors.map((a) =>
          `<option ${fields?.actor === a ? "selected" : ""}>${escapeHtml(a)}</option>`).join("")}</select>
      </label>
      <label>asset
        <select name="asset">${assets.map((a) =>
          `<option ${fields?.asset === a ? "selected" : ""}>${escapeHtml(a)}</option>`).join("")}</select>
      </label>
      <fieldset><legend>accepted chains and fixed exchange rates</legend>
        ${rateInputs}
      </fieldset>
      <label>open for
        <input name="duration" type="number" value="${fields ? fields.durationMs / 1000 : 30}"
               min="1"> seconds
      </label>
      <button type="submit">Create</button>
    </form>
  </section>`;
}

export function renderToast(code: string, message: string): string {
  return `<div class="toast error"><strong>${escapeHtml(code)}</strong>
          ${escapeHtml(message)}</div>`;
}
