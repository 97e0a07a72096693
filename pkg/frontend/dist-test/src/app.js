// Wiring: hash routing, 1s polling, event delegation, toasts on errors.
// State changes flow strictly gateway -> render; user intents flow
// render -> gateway. No optimistic updates: after an action we simply
// wait for the next poll to show whatever the chains and log now say.
import { ApiClient, GatewayError } from "./api.js";
import { renderCreateForm, renderDashboard, renderDetail, renderToast } from "./render.js";
import { createFormErrors } from "./validate.js";
const POLL_MS = 1000;
const params = new URLSearchParams(location.search);
const api = new ApiClient(params.get("gateway") ?? location.origin, params.get("token") ?? "dev-token");
const app = document.getElementById("app");
const toasts = document.getElementById("toasts");
let actor = localStorage.getItem("crossdeal-actor") ?? "bidder-1";
let accounts = {}; // actor name -> account address
let names = {}; // account address -> actor name
let chains = [];
let lastRendered = "";
function route() {
    const hash = location.hash.replace(/^#\/?/, "");
    if (hash.startsWith("auction/"))
        return { page: "detail", id: hash.slice(8) };
    if (hash === "create")
        return { page: "create" };
    return { page: "dashboard" };
}
function setHtml(html) {
    if (html !== lastRendered) {
        app.innerHTML = html;
        lastRendered = html;
    }
}
function toast(code, message) {
    const node = document.createElement("div");
    node.innerHTML = renderToast(code, message);
    toasts.appendChild(node.firstElementChild);
    setTimeout(() => toasts.firstElementChild?.remove(), 4000);
}
async function guarded(action) {
    try {
        return await action();
    }
    catch (err) {
        if (err instanceof GatewayError) {
            toast(err.code, err.message);
        }
        else {
            toast("Network", String(err));
        }
        return null;
    }
}
async function refresh() {
    const current = route();
    try {
        if (current.page === "dashboard") {
            const { auctions } = await api.listAuctions();
            setHtml(renderHeader() + renderDashboard(auctions));
        }
        else if (current.page === "detail" && current.id) {
            const view = await api.getAuction(current.id);
            setHtml(renderHeader() + renderDetail(view, actor, names));
        }
        else if (current.page === "create") {
            // Render once; the form keeps user input between polls.
            if (!lastRendered.includes("data-action=\"create-auction\"")) {
                setHtml(renderHeader() +
                    renderCreateForm(chains, ["ticket-1", "ticket-2", "ticket-3"], Object.keys(accounts), null, []));
            }
        }
    }
    catch (err) {
        if (err instanceof GatewayError && err.status === 404) {
            location.hash = "#/";
        }
    }
}
function renderHeader() {
    const options = Object.keys(accounts).map((name) => `<option ${name === actor ? "selected" : ""}>${name}</option>`).join("");
    return `
  <header>
    <h1><a href="#/">cross-chain auctions</a></h1>
    <label class="actor">acting as
      <select id="actor-select">${options}</select>
    </label>
  </header>`;
}
function readCreateForm(form) {
    const data = new FormData(form);
    const acceptedChains = chains.filter((chain) => chain !== "ticket-chain" && data.get(`chain:${chain}`) !== null);
    const rates = {};
    for (const chain of acceptedChains) {
        rates[chain] = {
            num: String(data.get(`num:${chain}`) ?? ""),
            den: String(data.get(`den:${chain}`) ?? ""),
        };
    }
    return {
        actor: String(data.get("actor") ?? ""),
        asset: String(data.get("asset") ?? ""),
        acceptedChains,
        rates,
        durationMs: Number(data.get("duration")) * 1000,
    };
}
async function submitCreate(form) {
    const fields = readCreateForm(form);
    const errors = createFormErrors(fields);
    if (errors.length > 0) {
        setHtml(renderHeader() + renderCreateForm(chains, ["ticket-1", "ticket-2", "ticket-3"], Object.keys(accounts), fields, errors));
        return;
    }
    const created = await guarded(() => api.createAuction({
        actor: fields.actor,
        asset: fields.asset,
        accepted_chains: fields.acceptedChains,
        rates: Object.fromEntries(fields.acceptedChains.map((chain) => [
            chain, [Number(fields.rates[chain].num), Number(fields.rates[chain].den)],
        ])),
        duration_ms: fields.durationMs,
    }));
    if (created) {
        location.hash = `#/auction/${created.auction_id}`;
    }
}
document.addEventListener("click", async (event) => {
    const target = event.target.closest("[data-action]");
    if (!target || target instanceof HTMLFormElement)
        return;
    const id = target.dataset.id ?? "";
    switch (target.dataset.action) {
        case "goto-create":
            location.hash = "#/create";
            break;
        case "goto-dashboard":
            location.hash = "#/";
            break;
        case "view":
            location.hash = `#/auction/${id}`;
            break;
        case "end-auction":
            await guarded(() => api.endAuction(id, actor));
            break;
        case "withdraw-bid": {
            const form = target.closest("form");
            const chain = form.elements.namedItem("chain").value;
            await guarded(() => api.withdrawBid(id, actor, chain));
            break;
        }
    }
});
document.addEventListener("submit", async (event) => {
    const form = event.target;
    event.preventDefault();
    if (form.dataset.action === "add-existing") {
        const address = form.elements.namedItem("address").value;
        const view = await guarded(() => api.addExisting(address.trim()));
        if (view)
            location.hash = `#/auction/${view.auction_id}`;
    }
    else if (form.dataset.action === "place-bid") {
        const chain = form.elements.namedItem("chain").value;
        const amount = Number(form.elements.namedItem("amount").value);
        await guarded(() => api.placeBid(form.dataset.id, actor, chain, amount));
        form.reset();
    }
    else if (form.dataset.action === "create-auction") {
        await submitCreate(form);
    }
});
document.addEventListener("change", (event) => {
    const target = event.target;
    if (target.id === "actor-select") {
        actor = target.value;
        localStorage.setItem("crossdeal-actor", actor);
        lastRendered = "";
        void refresh();
    }
});
window.addEventListener("hashchange", () => {
    lastRendered = "";
    void refresh();
});
async function boot() {
    accounts = await api.accounts();
    names = {};
    for (const [name, address] of Object.entries(accounts))
        names[address] = name;
    if (!(actor in accounts))
        actor = Object.keys(accounts)[0] ?? actor;
    chains = (await api.chains()).chains;
    await refresh();
    setInterval(() => void refresh(), POLL_MS);
}
void boot();
