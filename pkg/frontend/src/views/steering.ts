// Exploration/exploitation controls: rho and sigma dials, pause/resume/stop.
// Submission is blocked client-side on invalid drafts; the panel disables
// itself entirely once the run is out of the optimizing/paused states.

import { escapeHtml, fmt } from "../format.js";
import { SteeringDraft, validateSteering } from "../state.js";

export interface SteeringAck {
  appliesFromK: number;
  event: Record<string, unknown>;
}

export function steeringPanel(
  status: string,
  currentRho: number | null,
  currentSigma: number | null,
  draft: SteeringDraft,
  lastAck: SteeringAck | null,
): string {
  const steerable = status === "optimizing" || status === "paused";
  const disabled = steerable ? "" : " disabled";
  const validation = validateSteering(draft);
  const canSubmit = steerable && validation.ok;
  const problems =
    validation.problems.length && (draft.rho !== null || draft.sigma !== null)
      ? `<ul class="problems">${validation.problems.map((p) => `<li>${escapeHtml(p)}</li>`).join("")}</ul>`
      : "";
  const ack = lastAck
    ? `<p class="ack" data-role="steer-ack">applied from iteration ${lastAck.appliesFromK}</p>`
    : "";
  const note = steerable
    ? ""
    : `<p class="note">run is ${escapeHtml(status)}; steering applies only while optimizing</p>`;
  return (
    `<div class="steering-panel" data-status="${escapeHtml(status)}">` +
    `<h3>Steering</h3>` +
    `<label>exploration fraction rho ` +
    `<input type="number" step="0.05" min="0" max="1" data-role="rho" ` +
    `value="${draft.rho ?? ""}" placeholder="${currentRho !== null ? fmt(currentRho) : ""}"${disabled}/></label>` +
    `<label>mutation scale sigma ` +
    `<input type="number" step="0.01" min="0.000001" data-role="sigma" ` +
    `value="${draft.sigma ?? ""}" placeholder="${currentSigma !== null ? fmt(currentSigma) : ""}"${disabled}/></label>` +
    problems +
    `<div class="buttons">` +
    `<button data-role="steer-submit"${canSubmit ? "" : " disabled"}>apply</button>` +
    `<button data-role="steer-pause"${status === "optimizing" ? "" : " disabled"}>pause</button>` +
    `<button data-role="steer-resume"${status === "paused" ? "" : " disabled"}>resume</button>` +
    `<button data-role="steer-stop"${disabled}>stop</button>` +
    `</div>` +
    ack +
    note +
    `</div>`
  );
}
