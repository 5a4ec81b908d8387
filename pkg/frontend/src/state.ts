// Serializable dashboard view state. Everything that changes what the user
// sees lives here, so any view can be rebuilt from its URL alone and a URL
// pasted by a colleague reproduces the identical view.

import type { FilterSelection } from './api.js';
import { emptyFilters } from './api.js';

export type TabId = 'general' | 'dropout' | 'disciplines';
export type GeneralView = 'charts' | 'tda';
export type ChartMode = 'pie' | 'bar';
export type RankOrder = 'top' | 'bottom';
export type RateOrder = 'highest' | 'lowest';
export type FailureKind = 'all' | 'grade' | 'frequency';
export type CrDisplay = 'count' | 'percent';
export type SituationId = 'dropout' | 'graduated' | 'in_progress';

export const TABS: readonly TabId[] = ['general', 'dropout', 'disciplines'];
export const GENERAL_VIEWS: readonly GeneralView[] = ['charts', 'tda'];
export const CHART_MODES: readonly ChartMode[] = ['pie', 'bar'];
export const RANK_ORDERS: readonly RankOrder[] = ['top', 'bottom'];
export const RATE_ORDERS: readonly RateOrder[] = ['highest', 'lowest'];
export const FAILURE_KINDS: readonly FailureKind[] = ['all', 'grade', 'frequency'];
export const CR_DISPLAYS: readonly CrDisplay[] = ['count', 'percent'];
export const SITUATIONS: readonly SituationId[] = ['dropout', 'graduated', 'in_progress'];

export const LIMIT_MIN = 5;
export const LIMIT_MAX = 20;
export const DEFAULT_LIMIT = 10;
export const DEFAULT_CHART_MODE: ChartMode = 'pie';

export interface ViewState {
  tab: TabId;
  generalView: GeneralView;
  filters: FilterSelection;
  rankingSituation: SituationId;
  rankingOrder: RankOrder;
  categoryGroup: string;
  categoryIndex: string;
  /** Pie/bar override per category chart, keyed "group.index"; charts at the default mode carry no entry. */
  categoryModes: { [chartKey: string]: ChartMode };
  failureKind: FailureKind;
  crDisplay: CrDisplay;
  disciplineOrder: RateOrder;
  disciplineLimit: number;
}

export function defaultViewState(): ViewState {
  return {
    tab: 'general',
    generalView: 'charts',
    filters: emptyFilters(),
    rankingSituation: 'dropout',
    rankingOrder: 'top',
    categoryGroup: 'socioeconomic',
    categoryIndex: 'income_band',
    categoryModes: {},
    failureKind: 'all',
    crDisplay: 'count',
    disciplineOrder: 'highest',
    disciplineLimit: DEFAULT_LIMIT,
  };
}

/** Force a slider value into the allowed 5..20 ranking window. */
export function clampLimit(value: number): number {
  if (!Number.isFinite(value)) {
    return DEFAULT_LIMIT;
  }
  return Math.min(LIMIT_MAX, Math.max(LIMIT_MIN, Math.trunc(value)));
}

export function categoryModeKey(group: string, index: string): string {
  return `${group}.${index}`;
}

export function chartModeFor(state: ViewState, group: string, index: string): ChartMode {
  return state.categoryModes[categoryModeKey(group, index)] ?? DEFAULT_CHART_MODE;
}

/** New state with one category chart's mode set; default-mode entries are dropped, not stored. */
export function withCategoryMode(
  state: ViewState,
  group: string,
  index: string,
  mode: ChartMode,
): ViewState {
  const key = categoryModeKey(group, index);
  const modes = { ...state.categoryModes };
  if (mode === DEFAULT_CHART_MODE) {
    delete modes[key];
  } else {
    modes[key] = mode;
  }
  return { ...state, categoryModes: modes };
}

function pick<T extends string>(raw: string | null, allowed: readonly T[], fallback: T): T {
  return allowed.includes(raw as T) ? (raw as T) : fallback;
}

/**
 * Encode a view state as a URL query string (no leading "?").
 *
 * Only fields that differ from the defaults are written, so the default
 * view encodes to the bare page URL. Decoding the result reproduces the
 * state exactly.
 */
export function encodeViewState(state: ViewState): string {
  const defaults = defaultViewState();
  const params = new URLSearchParams();
  const put = (key: string, value: string, fallback: string) => {
    if (value !== fallback) {
      params.set(key, value);
    }
  };

  put('tab', state.tab, defaults.tab);
  put('view', state.generalView, defaults.generalView);
  put('course', state.filters.course ?? '', '');
  put('year', state.filters.entryYear === null ? '' : String(state.filters.entryYear), '');
  put('income', state.filters.incomeBand ?? '', '');
  put('city', state.filters.birthCity ?? '', '');
  put('quota', state.filters.quotaType ?? '', '');
  put('school', state.filters.highSchoolType ?? '', '');
  put('sit', state.rankingSituation, defaults.rankingSituation);
  put('order', state.rankingOrder, defaults.rankingOrder);
  put('group', state.categoryGroup, defaults.categoryGroup);
  put('index', state.categoryIndex, defaults.categoryIndex);
  for (const key of Object.keys(state.categoryModes).sort()) {
    params.append('cmode', `${key}:${state.categoryModes[key]}`);
  }
  put('kind', state.failureKind, defaults.failureKind);
  put('cr', state.crDisplay, defaults.crDisplay);
  put('dorder', state.disciplineOrder, defaults.disciplineOrder);
  put('limit', String(state.disciplineLimit), String(defaults.disciplineLimit));
  return params.toString();
}

/**
 * Decode a query string (with or without leading "?") into a view state.
 *
 * Unknown or malformed values fall back to the defaults so a hand-edited
 * URL still yields a working view; the discipline limit is clamped to the
 * slider bounds.
 */
export function decodeViewState(search: string): ViewState {
  const params = new URLSearchParams(search.startsWith('?') ? search.slice(1) : search);
  const state = defaultViewState();
  const text = (key: string): string | null => {
    const value = params.get(key);
    return value === null || value === '' ? null : value;
  };

  state.tab = pick(params.get('tab'), TABS, state.tab);
  state.generalView = pick(params.get('view'), GENERAL_VIEWS, state.generalView);
  state.filters.course = text('course');
  const year = text('year');
  if (year !== null && /^-?\d+$/.test(year)) {
    state.filters.entryYear = parseInt(year, 10);
  }
  state.filters.incomeBand = text('income');
  state.filters.birthCity = text('city');
  state.filters.quotaType = text('quota');
  state.filters.highSchoolType = text('school');
  state.rankingSituation = pick(params.get('sit'), SITUATIONS, state.rankingSituation);
  state.rankingOrder = pick(params.get('order'), RANK_ORDERS, state.rankingOrder);
  state.categoryGroup = text('group') ?? state.categoryGroup;
  state.categoryIndex = text('index') ?? state.categoryIndex;
  for (const entry of params.getAll('cmode')) {
    const split = entry.lastIndexOf(':');
    if (split <= 0) {
      continue;
    }
    const key = entry.slice(0, split);
    const mode = pick(entry.slice(split + 1), CHART_MODES, DEFAULT_CHART_MODE);
    if (mode !== DEFAULT_CHART_MODE) {
      state.categoryModes[key] = mode;
    }
  }
  state.failureKind = pick(params.get('kind'), FAILURE_KINDS, state.failureKind);
  state.crDisplay = pick(params.get('cr'), CR_DISPLAYS, state.crDisplay);
  state.disciplineOrder = pick(params.get('dorder'), RATE_ORDERS, state.disciplineOrder);
  const limit = text('limit');
  if (limit !== null && /^\d+$/.test(limit)) {
    state.disciplineLimit = clampLimit(parseInt(limit, 10));
  }
  return state;
}
