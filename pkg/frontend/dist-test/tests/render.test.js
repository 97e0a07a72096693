import assert from "node:assert/strict";
import { test } from "node:test";
import { renderCreateForm, renderDashboard, renderDetail } from "../src/render.js";
function view(overrides = {}) {
    return {
        auction_id: "a".repeat(64),
        asset: "ticket-1",
        ticket_chain: "ticket-chain",
        accepted_chains: ["coin-a", "coin-b"],
        rates: { "coin-a": [1, 1], "coin-b": [2, 1] },
        created_at: 1000,
        ends_at: 31000,
        now: 5000,
        status: "open",
        auctioneer: { name: "auctioneer", account: "f".repeat(64) },
        bids: [],
        contracts: {
            "ticket-chain": { address: "c".repeat(64), phase: "Escrowed" },
            "coin-a": { address: "d".repeat(64), phase: "Escrowed" },
            "coin-b": { address: "e".repeat(64), phase: "Deployed" },
        },
        conclusion: null,
        ticket_owner: "c".repeat(64),
        ...overrides,
    };
}
const NAMES = { ["b".repeat(64)]: "bidder-1", ["9".repeat(64)]: "bidder-2" };
test("empty dashboard renders an empty state with both toolbar actions", () => {
    const html = renderDashboard([]);
    assert.match(html, /No auctions known yet/);
    assert.match(html, /Create New Auction/);
    assert.match(html, /Add Existing Auction/);
});
test("dashboard lists one card per auction", () => {
    const html = renderDashboard([view(), view({ asset: "ticket-2" })]);
    assert.equal((html.match(/<article class="card/g) ?? []).length, 2);
    assert.match(html, /ticket-2/);
});
test("the asterisk follows the server's highest flag, not the amounts", () => {
    // The smaller raw amount is flagged (its normalized value won server-side).
    const html = renderDetail(view({
        bids: [
            { bidder: "b".repeat(64), chain: "coin-a", amount: 100,
                normalized: [100, 1], log_seq: 2, highest: false },
            { bidder: "9".repeat(64), chain: "coin-b", amount: 60,
                normalized: [120, 1], log_seq: 3, highest: true },
        ],
    }), "bidder-1", NAMES);
    const rows = html.split("<tr").filter((r) => r.includes("<td"));
    assert.equal(rows.length, 2);
    assert.ok(!rows[0].includes("highest"));
    assert.ok(rows[1].includes("highest"));
    assert.equal((html.match(/<td>\*<\/td>/g) ?? []).length, 1);
});
test("end-auction button is auctioneer-only", () => {
    assert.match(renderDetail(view(), "auctioneer", NAMES), /data-action="end-auction"/);
    assert.doesNotMatch(renderDetail(view(), "bidder-1", NAMES), /data-action="end-auction"/);
});
test("bid form is enabled while open and disabled after", () => {
    const open = renderDetail(view(), "bidder-1", NAMES);
    assert.match(open, /data-action="place-bid"/);
    assert.doesNotMatch(open, /select name="chain" disabled/);
    const closed = renderDetail(view({ status: "ended" }), "bidder-1", NAMES);
    assert.match(closed, /bidding is closed/);
    assert.match(closed, /<button type="submit" disabled>/);
});
test("committed view shows the settlement lines", () => {
    const html = renderDetail(view({
        status: "committed",
        ticket_owner: "b".repeat(64),
        bids: [{ bidder: "b".repeat(64), chain: "coin-a", amount: 100,
                normalized: [100, 1], log_seq: 2, highest: true }],
    }), "bidder-2", NAMES);
    assert.match(html, /Concluded: committed/);
    assert.match(html, /ticket-1 → bidder-1/);
    assert.match(html, /100 on coin-a/);
});
test("aborted view says everything was returned", () => {
    const html = renderDetail(view({ status: "aborted" }), "bidder-1", NAMES);
    assert.match(html, /Concluded: aborted/);
    assert.match(html, /returned to its owner/);
});
test("create form renders a rate input per coin chain", () => {
    const html = renderCreateForm(["ticket-chain", "coin-a", "coin-b"], ["ticket-1"], ["auctioneer"], null, []);
    assert.equal((html.match(/class="rate-row"/g) ?? []).length, 2);
    assert.doesNotMatch(html, /name="num:ticket-chain"/);
});
test("create form shows blocking errors", () => {
    const html = renderCreateForm(["coin-a"], ["ticket-1"], ["auctioneer"], null, ["exchange rate for coin-a must be a positive ratio"]);
    assert.match(html, /class="errors"/);
    assert.match(html, /positive ratio/);
});
test("markup escapes untrusted strings", () => {
    const html = renderDashboard([view({ asset: "<script>alert(1)</script>" })]);
    assert.doesNotMatch(html, /<script>alert/);
    assert.match(html, /&lt;script&gt;/);
});
