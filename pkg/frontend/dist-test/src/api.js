// Gateway client. Every mutation carries the dev token; every 4xx/5xx is
// surfaced as a GatewayError whose code the caller can toast.
export class GatewayError extends Error {
    code;
    status;
    constructor(code, message, status) {
        super(message);
        this.code = code;
        this.status = status;
    }
}
export class ApiClient {
    baseUrl;
    token;
    fetchFn;
    constructor(baseUrl, token = "dev-token", fetchFn = (input, init) => fetch(input, init)) {
        this.baseUrl = baseUrl;
        this.token = token;
        this.fetchFn = fetchFn;
    }
    url(path) {
        return this.baseUrl.replace(/\/$/, "") + path;
    }
    async request(path, init) {
        const response = await this.fetchFn(this.url(path), init);
        const body = await response.json().catch(() => ({}));
        if (!response.ok) {
            const detail = body.detail;
            throw new GatewayError(detail?.code ?? "Error", detail?.message ?? response.statusText, response.status);
        }
        return body;
    }
    post(path, body) {
        return this.request(path, {
            method: "POST",
            headers: { "content-type": "application/json", "x-dev-token": this.token },
            body: JSON.stringify(body),
        });
    }
    listAuctions() {
        return this.request("/auctions");
    }
    getAuction(id) {
        return this.request(`/auctions/${id}`);
    }
    accounts() {
        return this.request("/accounts");
    }
    chains() {
        return this.request("/chains");
    }
    health() {
        return this.request("/health");
    }
    createAuction(body) {
        return this.post("/auctions", body);
    }
    addExisting(ticketContract) {
        return this.post("/auctions/add", { ticket_contract: ticketContract });
    }
    placeBid(id, actor, chain, amount) {
        return this.post(`/auctions/${id}/bids`, { actor, chain, amount });
    }
    withdrawBid(id, actor, chain) {
        return this.post(`/auctions/${id}/withdraw`, { actor, chain });
    }
    endAuction(id, actor) {
        return this.post(`/auctions/${id}/end`, { actor });
    }
}
