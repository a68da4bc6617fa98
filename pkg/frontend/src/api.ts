/** Service client: scenario fetch, episode upload, session history. */

import { ScenarioResponse, Vec } from "./dynamics.js";

export interface LandingOutcome {
  landed: boolean;
  final_speed: number;
  final_attitude_deg: number;
  on_pad: boolean;
}

export interface UploadAck {
  id: string;
  landing_outcome: LandingOutcome;
  n_steps: number;
}

export interface UploadRejection {
  status: number;
  error: string;
}

export class ApiError extends Error {
  constructor(public status: number, public detail: string) {
    super(`HTTP ${status}: ${detail}`);
  }
}

export type FetchLike = typeof fetch;

export async function fetchScenario(
  baseUrl = "",
  fetchImpl: FetchLike = fetch,
): Promise<ScenarioResponse> {
  const res = await fetchImpl(`${baseUrl}/api/scenario`);
  if (!res.ok) throw new ApiError(res.status, await res.text());
  return (await res.json()) as ScenarioResponse;
}

export interface EpisodeUpload {
  initial_state: Vec;
  inputs: Vec[];
  states?: Vec[];
  dt: number;
  meta: Record<string, string>;
}

/**
 * Upload one finished episode. Resolves with the server ack on 200, throws
 * ApiError carrying the server's reason on 400/409, and rethrows network
 * failures so the caller can offer a retry (the episode stays in memory —
 * the UI never treats local data as canonical).
 */
export async function uploadEpisode(
  body: EpisodeUpload,
  baseUrl = "",
  fetchImpl: FetchLike = fetch,
): Promise<UploadAck> {
  const res = await fetchImpl(`${baseUrl}/api/demonstrations`, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify(body),
  });
  if (!res.ok) {
    let detail = "";
    try {
      const doc = await res.json();
      detail = doc.error ?? JSON.stringify(doc);
    } catch {
      detail = await res.text();
    }
    throw new ApiError(res.status, detail);
  }
  return (await res.json()) as UploadAck;
}

export interface DemonstrationEntry {
  id: string;
  n_steps: number;
  meta: Record<string, string>;
}

export async function listDemonstrations(
  baseUrl = "",
  fetchImpl: FetchLike = fetch,
): Promise<DemonstrationEntry[]> {
  const res = await fetchImpl(`${baseUrl}/api/demonstrations`);
  if (!res.ok) throw new ApiError(res.status, await res.text());
  const doc = await res.json();
  return doc.demonstrations as DemonstrationEntry[];
}
