import type { Ratio } from "./types.js";

export function escapeHtml(text: string): string {
  return text.replace(/[&<>"']/g, (ch) =>
    ({ "&": "&amp;", "<": "&lt;", ">": "&gt;", '"': "&quot;", "'": "&#39;" })[ch]!,
  );
}

export function shortId(value: string, length = 10): string {
  return value.length <= length ? value : value.slice(0, length) + "…";
}

export function formatRatio([num, den]: Ratio): string {
  return den === 1 ? String(num) : `${num}/${den}`;
}

// Gateway clocks are milliseconds since the stack booted.
export function formatTime(ms: number): string {
  return `t+${(ms / 1000).toFixed(1)}s`;
}

export function formatCountdown(endsAt: number, now: number): string {
  const left = endsAt - now;
  if (left <= 0) return "bidding closed";
  return `${Math.ceil(left / 1000)}s left`;
}
