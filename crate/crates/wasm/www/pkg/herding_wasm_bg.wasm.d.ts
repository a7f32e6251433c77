/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_decisioncurve_free: (a: number, b: number) => void;
export const __wbg_simulationresult_free: (a: number, b: number) => void;
export const decisionCurve: (a: number, b: number) => [number, number, number];
export const decisioncurve_fragment: (a: number) => [number, number];
export const decisioncurve_merge: (a: number) => [number, number];
export const decisioncurve_sizes: (a: number) => [number, number];
export const decisioncurve_trade: (a: number) => [number, number];
export const meanfield: (a: number, b: number) => [number, number, number, number];
export const simulate: (a: number, b: number, c: bigint, d: bigint, e: number, f: number) => [number, number, number];
export const simulationresult_alpha: (a: number) => number;
export const simulationresult_alpha_stderr: (a: number) => number;
export const simulationresult_largest_group: (a: number) => number;
export const simulationresult_probabilities: (a: number) => [number, number];
export const simulationresult_trade_fraction: (a: number) => number;
export const simulationresult_values: (a: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
