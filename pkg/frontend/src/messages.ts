/** Session protocol messages, validated with zod on both directions. */

import { z } from "zod";

const vec3 = z.tuple([z.number(), z.number(), z.number()]);
const rgba = z.tuple([z.number(), z.number(), z.number(), z.number()]);

export const tfPointSchema = z.tuple([z.number(), rgba]);
export type TfPoint = z.infer<typeof tfPointSchema>;

export const channelSpecSchema = z.object({
  slot: z.number().int().nonnegative(),
  channel: z.number().int().nonnegative().optional(),
  tf: z.array(tfPointSchema).min(2),
  levelRange: z.tuple([z.number().int(), z.number().int()]).optional(),
});
export type ChannelSpec = z.infer<typeof channelSpecSchema>;

export const setCameraSchema = z.object({
  type: z.literal("set_camera"),
  position: vec3,
  target: vec3.optional(),
  up: vec3.optional(),
  fov: z.number().optional(),
});

export const setChannelsSchema = z.object({
  type: z.literal("set_channels"),
  channels: z.array(channelSpecSchema).min(1),
});

export const setConfigSchema = z.object({
  type: z.literal("set_config"),
  imageDims: z.tuple([z.number().int().positive(), z.number().int().positive()]).optional(),
  baseStep: z.number().positive().optional(),
  maxRequests: z.number().int().positive().optional(),
});

export const clientMessageSchema = z.discriminatedUnion("type", [
  setCameraSchema,
  setChannelsSchema,
  setConfigSchema,
]);
export type ClientMessage = z.infer<typeof clientMessageSchema>;

export const frameMessageSchema = z.object({
  type: z.literal("frame"),
  frameId: z.number().int().nonnegative(),
  pngBytes: z.string().min(1),
});
export type FrameMessage = z.infer<typeof frameMessageSchema>;

export const statsMessageSchema = z.object({
  type: z.literal("stats"),
  frameId: z.number().int().nonnegative(),
  requests: z.number().int().nonnegative(),
  residentBricks: z.number().int().nonnegative(),
  residentBytes: z.number().int().nonnegative(),
  converged: z.boolean(),
  renderMs: z.number().nonnegative(),
});
export type StatsMessage = z.infer<typeof statsMessageSchema>;

export const errorMessageSchema = z.object({
  type: z.literal("error"),
  message: z.string(),
});
export type ErrorMessage = z.infer<typeof errorMessageSchema>;

export const serverMessageSchema = z.discriminatedUnion("type", [
  frameMessageSchema,
  statsMessageSchema,
  errorMessageSchema,
]);
export type ServerMessage = z.infer<typeof serverMessageSchema>;

export function encodeClientMessage(msg: ClientMessage): string {
  return JSON.stringify(clientMessageSchema.parse(msg));
}

/** Parse one incoming text frame; returns null for anything malformed. */
export function parseServerMessage(text: string): ServerMessage | null {
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch {
    return null;
  }
  const result = serverMessageSchema.safeParse(raw);
  return result.success ? result.data : null;
}
