import assert from "node:assert/strict";
import { test } from "node:test";

import type { CreateFormFields } from "../src/types.js";
import { createFormErrors } from "../src/validate.js";

function fields(overrides: Partial<CreateFormFields> = {}): CreateFormFields {
  return {
    actor: "auctioneer",
    asset: "ticket-1",
    acceptedChains: ["coin-a", "coin-b"],
    rates: { "coin-a": { num: "1", den: "1" }, "coin-b": { num: "2", den: "1" } },
    durationMs: 30_000,
    ...overrides,
  };
}

test("a complete form has no errors", () => {
  assert.deepEqual(createFormErrors(fields()), []);
});

test("a missing rate blocks submission", () => {
  const errors = createFormErrors(fields({
    rates: { "coin-a": { num: "1", den: "1" } },
  }));
  assert.equal(errors.length, 1);
  assert.match(errors[0], /coin-b/);
});

test("zero or negative rates block submission", () => {
  for (const rate of [{ num: "0", den: "1" }, { num: "1", den: "0" },
                      { num: "-2", den: "1" }, { num: "x", den: "1" }]) {
    const errors = createFormErrors(fields({
      acceptedChains: ["coin-a"],
      rates: { "coin-a": rate },
    }));
    assert.ok(errors.some((e) => e.includes("coin-a")), JSON.stringify(rate));
  }
});

test("an end time in the past blocks submission", () => {
  const errors = createFormErrors(fields({ durationMs: 0 }));
  assert.ok(errors.some((e) => e.includes("future")));
  assert.ok(createFormErrors(fields({ durationMs: -5000 })).length > 0);
});

test("at least one coin chain must be accepted", () => {
  const errors = createFormErrors(fields({ acceptedChains: [], rates: {} }));
  assert.ok(errors.some((e) => e.includes("at least one")));
});

test("actor and asset are required", () => {
  assert.ok(createFormErrors(fields({ actor: "" })).length > 0);
  assert.ok(createFormErrors(fields({ asset: "" })).length > 0);
});
