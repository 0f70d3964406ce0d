// Browser wiring: seed selector, email paste box with DP toggle, and
// the live meter with seeded-vs-baseline bars.

import { ApiError, MeterApi } from "./api.js";
import { EstimateView, LABEL_ORDER, MeterController } from "./meter.js";

const BAR_WIDTHS: Record<string, string> = {
  weak: "25%",
  fair: "50%",
  strong: "75%",
  "very strong": "100%",
};

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function renderBar(target: HTMLElement, label: string | null): void {
  const fill = target.querySelector<HTMLElement>(".fill");
  const text = target.querySelector<HTMLElement>(".label");
  if (!fill || !text) return;
  if (label === null) {
    fill.style.width = "0";
    text.textContent = "–";
    return;
  }
  fill.style.width = BAR_WIDTHS[label] ?? "0";
  fill.dataset.level = String(LABEL_ORDER.indexOf(label as never));
  text.textContent = label;
}

function renderView(view: EstimateView): void {
  const message = el<HTMLElement>("message");
  const deltaNode = el<HTMLElement>("delta");
  renderBar(el("seeded-bar"), view.seeded?.strength_label ?? null);
  renderBar(el("baseline-bar"), view.baseline?.strength_label ?? null);
  deltaNode.className = view.delta ?? "";
  deltaNode.textContent =
    view.delta === "downgrade"
      ? "weaker for this community than the generic meter suggests"
      : view.delta === "upgrade"
        ? "stronger for this community than the generic meter suggests"
        : "";
  message.textContent = view.status === "error" ? (view.message ?? "error") : "";
}

export function start(baseUrl: string): MeterController {
  const api = new MeterApi(baseUrl);
  const controller = new MeterController({ api, render: renderView });

  const seedSelect = el<HTMLSelectElement>("seed-select");
  const passwordInput = el<HTMLInputElement>("password");
  const emailsBox = el<HTMLTextAreaElement>("emails");
  const dpToggle = el<HTMLInputElement>("dp-toggle");
  const dpZ = el<HTMLInputElement>("dp-z");
  const dpDelta = el<HTMLInputElement>("dp-delta");
  const createButton = el<HTMLButtonElement>("create-seed");
  const seedInfo = el<HTMLElement>("seed-info");

  void api.listSeeds().then((seeds) => {
    for (const seed of seeds) {
      const option = document.createElement("option");
      option.value = seed.seed_id;
      option.textContent = seed.seed_id;
      seedSelect.append(option);
    }
  });

  seedSelect.addEventListener("change", () => {
    controller.selectSeed(seedSelect.value);
    controller.input(passwordInput.value);
  });
  passwordInput.addEventListener("input", () => {
    controller.input(passwordInput.value);
  });
  createButton.addEventListener("click", () => {
    const emails = emailsBox.value
      .split(/\s+/)
      .map((line) => line.trim())
      .filter(Boolean);
    const dp = dpToggle.checked
      ? { z: Number(dpZ.value), delta: Number(dpDelta.value) }
      : undefined;
    controller
      .createSeed(emails, dp)
      .then((created) => {
        const option = document.createElement("option");
        option.value = created.seed_id;
        option.textContent = created.seed_id;
        seedSelect.append(option);
        seedSelect.value = created.seed_id;
        seedInfo.textContent =
          created.epsilon === undefined
            ? `seed ${created.seed_id}: ${created.k_used} accounts`
            : `seed ${created.seed_id}: ${created.k_used} accounts, ` +
              `epsilon = ${created.epsilon.toFixed(3)}`;
      })
      .catch((err) => {
        seedInfo.textContent =
          err instanceof ApiError ? err.detail : "seed creation failed";
      });
  });
  return controller;
}
