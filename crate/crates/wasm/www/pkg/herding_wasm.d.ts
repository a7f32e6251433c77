/* tslint:disable */
/* eslint-disable */

export class DecisionCurve {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly fragment: Float64Array;
    readonly merge: Float64Array;
    readonly sizes: Float64Array;
    /**
     * Buy plus sell.
     */
    readonly trade: Float64Array;
}

export class SimulationResult {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Density tail exponent, NaN when the tail is too short to fit.
     */
    readonly alpha: number;
    readonly alpha_stderr: number;
    readonly largest_group: number;
    /**
     * `P(|r| >= value)`.
     */
    readonly probabilities: Float64Array;
    readonly trade_fraction: number;
    /**
     * Distinct absolute rescaled returns.
     */
    readonly values: Float64Array;
}

/**
 * Fragment / trade / merge probabilities at [`curve_sizes`]`(max_size)`.
 */
export function decisionCurve(x: number, max_size: number): DecisionCurve;

/**
 * Stationary mean-field `n_s` for `s = 1..=n_agents`.
 */
export function meanfield(n_agents: number, x: number): Float64Array;

export function simulate(n_agents: number, x: number, steps: bigint, seed: bigint, iid_votes: boolean, rescale_k: number): SimulationResult;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_decisioncurve_free: (a: number, b: number) => void;
    readonly __wbg_simulationresult_free: (a: number, b: number) => void;
    readonly decisionCurve: (a: number, b: number) => [number, number, number];
    readonly decisioncurve_fragment: (a: number) => [number, number];
    readonly decisioncurve_merge: (a: number) => [number, number];
    readonly decisioncurve_sizes: (a: number) => [number, number];
    readonly decisioncurve_trade: (a: number) => [number, number];
    readonly meanfield: (a: number, b: number) => [number, number, number, number];
    readonly simulate: (a: number, b: number, c: bigint, d: bigint, e: number, f: number) => [number, number, number];
    readonly simulationresult_alpha: (a: number) => number;
    readonly simulationresult_alpha_stderr: (a: number) => number;
    readonly simulationresult_largest_group: (a: number) => number;
    readonly simulationresult_probabilities: (a: number) => [number, number];
    readonly simulationresult_trade_fraction: (a: number) => number;
    readonly simulationresult_values: (a: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
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
