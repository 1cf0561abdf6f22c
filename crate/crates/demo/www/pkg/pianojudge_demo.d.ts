/* tslint:disable */
/* eslint-disable */

export class MelView {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly bands: number;
    readonly frames: number;
    /**
     * Frame-major log-mel values.
     */
    readonly values: Float32Array;
}

export function accuracyWithin(predicted: string, truth: string, n: number): number;

export function noisyTournament(n: number, flip: number, pass_fraction: number, seed: number): string;

export function synthMel(level: number, seed: number): MelView;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_melview_free: (a: number, b: number) => void;
    readonly accuracyWithin: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
    readonly melview_bands: (a: number) => number;
    readonly melview_frames: (a: number) => number;
    readonly melview_values: (a: number) => [number, number];
    readonly noisyTournament: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly synthMel: (a: number, b: number) => [number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
