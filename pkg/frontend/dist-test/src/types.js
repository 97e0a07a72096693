// Shapes of the gateway's JSON responses. The client renders these as-is:
// winners, phases, and the highest-bid flag are decided server-side.
export {};
