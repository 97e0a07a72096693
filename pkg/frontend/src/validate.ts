// Create-form validation. The gateway re-checks everything; this exists so
// the submit button can refuse obviously broken forms before any request.

import type { CreateFormFields } from "./types.js";

export function createFormErrors(fields: CreateFormFields): string[] {
  const errors: string[] = [];
  if (!fields.actor) errors.push("select an acting account");
  if (!fields.asset) errors.push("select an asset to auction");
  if (fields.acceptedChains.length === 0) {
    errors.push("accept at least one coin chain");
  }
  for (const chain of fields.acceptedChains) {
    const rate = fields.rates[chain];
    const num = Number(rate?.num);
    const den = Number(rate?.den);
    if (!rate || !Number.isInteger(num) || !Number.isInteger(den) ||
        num <= 0 || den <= 0) {
      errors.push(`exchange rate for ${chain} must be a positive ratio`);
    }
  }
  if (!Number.isFinite(fields.durationMs) || fields.durationMs <= 0) {
    errors.push("end time must lie in the future");
  }
  return errors;
}
