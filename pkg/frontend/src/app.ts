// Dashboard controller. Owns the view state, decides which panels a state
// change touches, and refetches only those; presentation-only changes (the
// pie/bar toggle, the count/percent toggle) re-render from cached payloads
// without any request. Responses that arrive after a newer request was
// issued for the same panel are discarded by sequence number.

import {
  ApiRequestError,
  type ApiClient,
  type CourseRanking,
  type DisciplineRanking,
  type Distribution,
  type Envelope,
  type FailureHistogram,
  type FilterSelection,
  type Meta,
  type TdaHistogram,
} from './api.js';
import {
  esc,
  renderCourseRankingChart,
  renderDisciplineChart,
  renderDistributionChart,
  renderFailureHistogramChart,
  renderTdaChart,
} from './charts.js';
import {
  FAILURE_KINDS,
  LIMIT_MAX,
  LIMIT_MIN,
  chartModeFor,
  clampLimit,
  defaultViewState,
  withCategoryMode,
  type FailureKind,
  type GeneralView,
  type RankOrder,
  type RateOrder,
  type SituationId,
  type TabId,
  type ViewState,
} from './state.js';

export type PanelId =
  | 'situations'
  | 'ranking'
  | 'tda'
  | 'attendance'
  | 'cr'
  | 'failures'
  | 'categories'
  | 'disciplines';

const PANEL_IDS: readonly PanelId[] = [
  'situations',
  'ranking',
  'tda',
  'attendance',
  'cr',
  'failures',
  'categories',
  'disciplines',
];

/** The public request surface the dashboard needs; tests substitute fakes. */
export type DashboardApi = Pick<
  ApiClient,
  | 'meta'
  | 'situations'
  | 'courseRanking'
  | 'tdaHistogram'
  | 'attendanceBands'
  | 'crBands'
  | 'failureHistogram'
  | 'categories'
  | 'disciplineRanking'
>;

export const EMPTY_FILTER_MESSAGE = 'No students match the selected filters.';
export const EMPTY_SCOPE_MESSAGE = 'No dropout students match the current scope.';
export const EMPTY_RANKING_MESSAGE =
  'No disciplines to rank: only disciplines with at least 15 enrollments are ranked.';

export interface DashboardOptions {
  onStateChange?: (state: ViewState) => void;
}

interface Panel {
  id: PanelId;
  body: HTMLElement;
  seq: number;
  dirty: boolean;
  loading: boolean;
  payload: unknown;
  version: number | null;
  note: string | undefined;
}

function sameFilters(a: FilterSelection, b: FilterSelection): boolean {
  return (
    a.course === b.course &&
    a.entryYear === b.entryYear &&
    a.incomeBand === b.incomeBand &&
    a.birthCity === b.birthCity &&
    a.quotaType === b.quotaType &&
    a.highSchoolType === b.highSchoolType
  );
}

const COURSE_SCOPED_PANELS: readonly PanelId[] = [
  'attendance',
  'cr',
  'failures',
  'categories',
  'disciplines',
];

function panelsAffectedBy(prev: ViewState, next: ViewState): Set<PanelId> {
  const affected = new Set<PanelId>();
  if (!sameFilters(prev.filters, next.filters)) {
    affected.add('situations');
  }
  if (prev.filters.course !== next.filters.course) {
    for (const id of COURSE_SCOPED_PANELS) {
      affected.add(id);
    }
  }
  if (prev.rankingSituation !== next.rankingSituation || prev.rankingOrder !== next.rankingOrder) {
    affected.add('ranking');
  }
  if (prev.failureKind !== next.failureKind) {
    affected.add('failures');
  }
  if (prev.categoryGroup !== next.categoryGroup || prev.categoryIndex !== next.categoryIndex) {
    affected.add('categories');
  }
  if (prev.disciplineOrder !== next.disciplineOrder || prev.disciplineLimit !== next.disciplineLimit) {
    affected.add('disciplines');
  }
  return affected;
}

function optionList(values: readonly string[]): string {
  return values.map((value) => `<option value="${esc(value)}">${esc(value)}</option>`).join('');
}

function filterSelect(name: string, label: string, values: readonly string[]): string {
  return (
    `<label>${esc(label)} <select data-control="${name}">` +
    `<option value="">all</option>${optionList(values)}</select></label>`
  );
}

function article(id: PanelId, title: string, controls: string): string {
  return (
    `<article class="panel" data-panel="${id}">` +
    `<header><h2>${esc(title)}</h2>` +
    `<span class="stale-badge" data-role="stale" hidden></span></header>` +
    (controls ? `<div class="controls">${controls}</div>` : '') +
    `<div data-role="body"></div></article>`
  );
}

function ingestSummary(meta: Meta): string {
  const ingest = meta.ingest;
  return (
    `rows read ${ingest.rows_read}, kept ${ingest.rows_kept}, ` +
    `deduplicated ${ingest.rows_deduplicated}, rejected ${ingest.rows_rejected}; ` +
    `students ${ingest.students_built}, cohorts ${ingest.cohorts_kept}`
  );
}

function emptyMessage(text: string): string {
  return `<p class="empty" data-role="empty">${esc(text)}</p>`;
}

function excludedFootnote(count: number): string {
  const noun = count === 1 ? 'student' : 'students';
  return (
    `<p class="footnote" data-role="excluded-footnote" data-value="${count}">` +
    `Excludes ${count} ${noun} without a defined value for this field.</p>`
  );
}

export class Dashboard {
  private readonly root: HTMLElement;
  private readonly client: DashboardApi;
  private readonly options: DashboardOptions;
  private state: ViewState;
  private meta: Meta | null = null;
  private readonly panels = new Map<PanelId, Panel>();
  private newestVersion = 0;

  constructor(
    root: HTMLElement,
    client: DashboardApi,
    initialState: ViewState = defaultViewState(),
    options: DashboardOptions = {},
  ) {
    this.root = root;
    this.client = client;
    this.state = initialState;
    this.options = options;
  }

  /** Current view state; treat as immutable (state objects are replaced, never mutated). */
  getState(): ViewState {
    return this.state;
  }

  async start(): Promise<void> {
    this.root.innerHTML = '<p class="loading">Loading dataset description...</p>';
    let envelope: Envelope<Meta>;
    try {
      envelope = await this.client.meta();
    } catch (error) {
      this.renderStartFailure(error);
      return;
    }
    this.meta = envelope.data;
    this.newestVersion = envelope.snapshot_version;
    this.buildChrome();
    this.refreshDirtyVisible();
  }

  /** Replace the whole view state, as a URL history navigation does. */
  replaceState(state: ViewState): void {
    this.update(state);
  }

  private update(next: ViewState): void {
    const prev = this.state;
    this.state = next;
    for (const id of panelsAffectedBy(prev, next)) {
      const panel = this.panels.get(id);
      if (panel) {
        panel.dirty = true;
      }
    }
    this.syncControls();
    this.refreshDirtyVisible();
    if (prev.crDisplay !== next.crDisplay) {
      this.rerenderFromCache('cr');
    }
    if (prev.categoryModes !== next.categoryModes) {
      this.rerenderFromCache('categories');
    }
    this.options.onStateChange?.(this.state);
  }

  private visiblePanels(): readonly PanelId[] {
    switch (this.state.tab) {
      case 'general':
        return this.state.generalView === 'tda' ? ['tda'] : ['situations', 'ranking'];
      case 'dropout':
        return ['attendance', 'cr', 'failures', 'categories'];
      case 'disciplines':
        return ['disciplines'];
    }
  }

  private refreshDirtyVisible(): void {
    for (const id of this.visiblePanels()) {
      const panel = this.panels.get(id);
      if (panel && panel.dirty) {
        void this.refresh(panel);
      }
    }
  }

  private rerenderFromCache(id: PanelId): void {
    const panel = this.panels.get(id);
    if (!panel || panel.loading || panel.payload === undefined) {
      return;
    }
    if (this.visiblePanels().includes(id)) {
      this.renderPanel(panel);
    }
  }

  private async refresh(panel: Panel): Promise<void> {
    panel.dirty = false;
    panel.loading = true;
    const seq = ++panel.seq;
    panel.body.innerHTML = '<p class="loading">Loading...</p>';
    let envelope: Envelope<unknown>;
    try {
      envelope = await this.requestFor(panel.id);
    } catch (error) {
      if (seq !== panel.seq) {
        return;
      }
      panel.loading = false;
      this.renderFailure(panel, error);
      return;
    }
    if (seq !== panel.seq) {
      return;
    }
    panel.loading = false;
    panel.payload = envelope.data;
    panel.version = envelope.snapshot_version;
    panel.note = envelope.note;
    this.noteSnapshotVersion(envelope.snapshot_version);
    this.renderPanel(panel);
    this.updateStaleBadges();
  }

  private requestFor(id: PanelId): Promise<Envelope<unknown>> {
    const s = this.state;
    switch (id) {
      case 'situations':
        return this.client.situations(s.filters);
      case 'ranking':
        return this.client.courseRanking(s.rankingSituation, s.rankingOrder);
      case 'tda':
        return this.client.tdaHistogram();
      case 'attendance':
        return this.client.attendanceBands(s.filters.course);
      case 'cr':
        return this.client.crBands(s.filters.course);
      case 'failures':
        return this.client.failureHistogram(s.filters.course, s.failureKind);
      case 'categories':
        return this.client.categories(s.categoryGroup, s.categoryIndex, s.filters.course);
      case 'disciplines':
        return this.client.disciplineRanking(
          s.filters.course,
          s.disciplineOrder,
          clampLimit(s.disciplineLimit),
        );
    }
  }

  private renderPanel(panel: Panel): void {
    const notInformedLabel = this.meta?.not_informed_label ?? 'NOT_INFORMED';
    switch (panel.id) {
      case 'situations': {
        const distribution = panel.payload as Distribution;
        if (distribution.total === 0) {
          panel.body.innerHTML = emptyMessage(panel.note ?? EMPTY_FILTER_MESSAGE);
          return;
        }
        panel.body.innerHTML =
          renderDistributionChart(distribution, 'bar', { notInformedLabel }) +
          excludedFootnote(distribution.excluded_undefined);
        return;
      }
      case 'ranking': {
        const ranking = panel.payload as CourseRanking;
        panel.body.innerHTML = ranking.entries.length
          ? renderCourseRankingChart(ranking)
          : emptyMessage('No courses available.');
        return;
      }
      case 'tda': {
        const histogram = panel.payload as TdaHistogram;
        const warnings = histogram.warnings.length
          ? `<ul class="warnings" data-role="warnings">` +
            histogram.warnings.map((warning) => `<li>${esc(warning)}</li>`).join('') +
            `</ul>`
          : '';
        panel.body.innerHTML = histogram.entries.length
          ? renderTdaChart(histogram) + warnings
          : emptyMessage('No cohort data available.') + warnings;
        return;
      }
      case 'attendance': {
        const distribution = panel.payload as Distribution;
        if (distribution.total === 0) {
          panel.body.innerHTML = emptyMessage(EMPTY_SCOPE_MESSAGE);
          return;
        }
        panel.body.innerHTML =
          renderDistributionChart(distribution, 'pie', { notInformedLabel }) +
          excludedFootnote(distribution.excluded_undefined);
        return;
      }
      case 'cr': {
        const distribution = panel.payload as Distribution;
        if (distribution.total === 0) {
          panel.body.innerHTML = emptyMessage(EMPTY_SCOPE_MESSAGE);
          return;
        }
        panel.body.innerHTML =
          renderDistributionChart(distribution, 'bar', {
            notInformedLabel,
            foreground: this.state.crDisplay,
          }) + excludedFootnote(distribution.excluded_undefined);
        return;
      }
      case 'failures': {
        const histogram = panel.payload as FailureHistogram;
        panel.body.innerHTML = histogram.bins.length
          ? renderFailureHistogramChart(histogram)
          : emptyMessage(EMPTY_SCOPE_MESSAGE);
        return;
      }
      case 'categories': {
        const distribution = panel.payload as Distribution;
        if (distribution.total === 0) {
          panel.body.innerHTML = emptyMessage(EMPTY_SCOPE_MESSAGE);
          return;
        }
        const mode = chartModeFor(this.state, this.state.categoryGroup, this.state.categoryIndex);
        panel.body.innerHTML =
          renderDistributionChart(distribution, mode, { notInformedLabel }) +
          excludedFootnote(distribution.excluded_undefined);
        return;
      }
      case 'disciplines': {
        const ranking = panel.payload as DisciplineRanking;
        panel.body.innerHTML = ranking.entries.length
          ? renderDisciplineChart(ranking)
          : emptyMessage(EMPTY_RANKING_MESSAGE);
        return;
      }
    }
  }

  private renderFailure(panel: Panel, error: unknown): void {
    panel.body.innerHTML = '';
    const message =
      error instanceof ApiRequestError
        ? `Request failed (${error.status} ${error.code}): ${error.message}`
        : error instanceof Error
          ? `Request failed: ${error.message}`
          : 'Request failed.';
    const paragraph = document.createElement('p');
    paragraph.className = 'error';
    paragraph.setAttribute('data-role', 'error');
    paragraph.textContent = message;
    const button = document.createElement('button');
    button.type = 'button';
    button.setAttribute('data-role', 'retry');
    button.textContent = 'retry';
    button.addEventListener('click', () => {
      void this.refresh(panel);
    });
    panel.body.append(paragraph, button);
  }

  private renderStartFailure(error: unknown): void {
    this.root.innerHTML = '';
    const paragraph = document.createElement('p');
    paragraph.className = 'error';
    paragraph.setAttribute('data-role', 'error');
    paragraph.textContent =
      error instanceof Error ? `Could not load the dataset description: ${error.message}` : 'Could not load the dataset description.';
    const button = document.createElement('button');
    button.type = 'button';
    button.setAttribute('data-role', 'retry');
    button.textContent = 'retry';
    button.addEventListener('click', () => {
      void this.start();
    });
    this.root.append(paragraph, button);
  }

  private noteSnapshotVersion(version: number): void {
    if (version > this.newestVersion) {
      this.newestVersion = version;
    }
    const span = this.root.querySelector<HTMLElement>('[data-role="snapshot-version"]');
    if (span) {
      span.textContent = `snapshot v${this.newestVersion}`;
    }
  }

  private updateStaleBadges(): void {
    for (const panel of this.panels.values()) {
      const badge = this.root.querySelector<HTMLElement>(
        `[data-panel="${panel.id}"] [data-role="stale"]`,
      );
      if (!badge) {
        continue;
      }
      const stale = panel.version !== null && panel.version < this.newestVersion;
      badge.hidden = !stale;
      badge.textContent = stale
        ? `stale: snapshot v${panel.version}, newest is v${this.newestVersion}`
        : '';
    }
  }

  private buildChrome(): void {
    const meta = this.meta;
    if (!meta) {
      return;
    }
    this.root.innerHTML =
      `<header class="masthead">` +
      `<h1>Retention dashboard</h1>` +
      `<span data-role="snapshot-version">snapshot v${this.newestVersion}</span>` +
      `<span data-role="ingest-summary">${esc(ingestSummary(meta))}</span>` +
      `</header>` +
      `<nav class="tabs">` +
      `<button type="button" data-tab-button="general">General</button>` +
      `<button type="button" data-tab-button="dropout">Dropout analysis</button>` +
      `<button type="button" data-tab-button="disciplines">Disciplines</button>` +
      `</nav>` +
      `<section class="filters">` +
      filterSelect('filter-course', 'Course', meta.courses) +
      filterSelect('filter-year', 'Entry year', meta.entry_years.map(String)) +
      filterSelect('filter-income', 'Income band', meta.filter_values.income_band) +
      filterSelect('filter-city', 'Birth city', meta.filter_values.birth_city) +
      filterSelect('filter-quota', 'Quota type', meta.filter_values.quota_type) +
      filterSelect('filter-school', 'High school type', meta.filter_values.high_school_type) +
      `</section>` +
      `<main>` +
      `<section data-tab-panel="general">` +
      `<nav class="subtabs">` +
      `<button type="button" data-view-button="charts">Situation charts</button>` +
      `<button type="button" data-view-button="tda">Dropout rate by course</button>` +
      `</nav>` +
      `<div data-general-view="charts">` +
      article('situations', 'Student situations', '') +
      article(
        'ranking',
        'Courses by situation',
        `<label>Situation <select data-control="ranking-situation">` +
          `${optionList(meta.situations)}</select></label>` +
          `<label>Order <select data-control="ranking-order">` +
          `<option value="top">top</option><option value="bottom">bottom</option>` +
          `</select></label>`,
      ) +
      `</div>` +
      `<div data-general-view="tda">` +
      article('tda', 'Accumulated dropout rate by course', '') +
      `</div>` +
      `</section>` +
      `<section data-tab-panel="dropout">` +
      article('attendance', 'Attendance rate of dropout students', '') +
      article(
        'cr',
        'Credit ratio of dropout students',
        `<button type="button" data-control="cr-display"></button>`,
      ) +
      article(
        'failures',
        'Failures before dropping out',
        `<label>Kind <select data-control="failure-kind">${optionList(FAILURE_KINDS)}</select></label>`,
      ) +
      article(
        'categories',
        'Dropout profile by category',
        `<label>Group <select data-control="category-group">` +
          `${optionList(Object.keys(meta.category_groups))}</select></label>` +
          `<label>Field <select data-control="category-index"></select></label>` +
          `<button type="button" data-control="category-mode"></button>`,
      ) +
      `</section>` +
      `<section data-tab-panel="disciplines">` +
      article(
        'disciplines',
        'Disciplines by failure rate',
        `<label>Order <select data-control="discipline-order">` +
          `<option value="highest">highest</option><option value="lowest">lowest</option>` +
          `</select></label>` +
          `<label>Show <input type="range" data-control="discipline-limit"` +
          ` min="${LIMIT_MIN}" max="${LIMIT_MAX}" step="1"/>` +
          ` <output data-role="limit-value"></output></label>`,
      ) +
      `</section>` +
      `</main>`;

    this.panels.clear();
    for (const id of PANEL_IDS) {
      const body = this.root.querySelector<HTMLElement>(`[data-panel="${id}"] [data-role="body"]`);
      if (!body) {
        continue;
      }
      this.panels.set(id, {
        id,
        body,
        seq: 0,
        dirty: true,
        loading: false,
        payload: undefined,
        version: null,
        note: undefined,
      });
    }
    this.bindControls();
    this.syncControls();
  }

  private control<T extends HTMLElement>(name: string): T | null {
    return this.root.querySelector<T>(`[data-control="${name}"]`);
  }

  private setSelect(name: string, value: string): void {
    const select = this.control<HTMLSelectElement>(name);
    if (select) {
      select.value = value;
    }
  }

  private bindSelect(name: string, patch: (value: string) => Partial<ViewState>): void {
    const select = this.control<HTMLSelectElement>(name);
    if (!select) {
      return;
    }
    select.addEventListener('change', () => {
      this.update({ ...this.state, ...patch(select.value) });
    });
  }

  private bindFilter(name: string, patch: (value: string) => Partial<FilterSelection>): void {
    const select = this.control<HTMLSelectElement>(name);
    if (!select) {
      return;
    }
    select.addEventListener('change', () => {
      this.update({
        ...this.state,
        filters: { ...this.state.filters, ...patch(select.value) },
      });
    });
  }

  private bindControls(): void {
    for (const button of this.root.querySelectorAll<HTMLButtonElement>('[data-tab-button]')) {
      button.addEventListener('click', () => {
        this.update({ ...this.state, tab: button.dataset.tabButton as TabId });
      });
    }
    for (const button of this.root.querySelectorAll<HTMLButtonElement>('[data-view-button]')) {
      button.addEventListener('click', () => {
        this.update({ ...this.state, generalView: button.dataset.viewButton as GeneralView });
      });
    }
    this.bindFilter('filter-course', (value) => ({ course: value || null }));
    this.bindFilter('filter-year', (value) => ({ entryYear: value ? Number(value) : null }));
    this.bindFilter('filter-income', (value) => ({ incomeBand: value || null }));
    this.bindFilter('filter-city', (value) => ({ birthCity: value || null }));
    this.bindFilter('filter-quota', (value) => ({ quotaType: value || null }));
    this.bindFilter('filter-school', (value) => ({ highSchoolType: value || null }));
    this.bindSelect('ranking-situation', (value) => ({
      rankingSituation: value as SituationId,
    }));
    this.bindSelect('ranking-order', (value) => ({ rankingOrder: value as RankOrder }));
    this.bindSelect('failure-kind', (value) => ({ failureKind: value as FailureKind }));
    this.bindSelect('discipline-order', (value) => ({ disciplineOrder: value as RateOrder }));
    this.bindSelect('category-group', (value) => {
      const indexes = this.meta?.category_groups[value] ?? [];
      return { categoryGroup: value, categoryIndex: indexes[0] ?? this.state.categoryIndex };
    });
    this.bindSelect('category-index', (value) => ({ categoryIndex: value }));
    const modeButton = this.control<HTMLButtonElement>('category-mode');
    modeButton?.addEventListener('click', () => {
      const s = this.state;
      const current = chartModeFor(s, s.categoryGroup, s.categoryIndex);
      this.update(
        withCategoryMode(s, s.categoryGroup, s.categoryIndex, current === 'pie' ? 'bar' : 'pie'),
      );
    });
    const crButton = this.control<HTMLButtonElement>('cr-display');
    crButton?.addEventListener('click', () => {
      this.update({
        ...this.state,
        crDisplay: this.state.crDisplay === 'count' ? 'percent' : 'count',
      });
    });
    const slider = this.control<HTMLInputElement>('discipline-limit');
    slider?.addEventListener('change', () => {
      this.update({ ...this.state, disciplineLimit: clampLimit(Number(slider.value)) });
    });
  }

  private syncCategoryIndexOptions(): void {
    const select = this.control<HTMLSelectElement>('category-index');
    if (!select) {
      return;
    }
    const group = this.state.categoryGroup;
    if (select.dataset.group === group) {
      return;
    }
    select.dataset.group = group;
    select.innerHTML = optionList(this.meta?.category_groups[group] ?? []);
  }

  private syncControls(): void {
    const s = this.state;
    for (const button of this.root.querySelectorAll<HTMLButtonElement>('[data-tab-button]')) {
      button.classList.toggle('active', button.dataset.tabButton === s.tab);
    }
    for (const section of this.root.querySelectorAll<HTMLElement>('[data-tab-panel]')) {
      section.hidden = section.dataset.tabPanel !== s.tab;
    }
    for (const button of this.root.querySelectorAll<HTMLButtonElement>('[data-view-button]')) {
      button.classList.toggle('active', button.dataset.viewButton === s.generalView);
    }
    for (const block of this.root.querySelectorAll<HTMLElement>('[data-general-view]')) {
      block.hidden = block.dataset.generalView !== s.generalView;
    }
    this.setSelect('filter-course', s.filters.course ?? '');
    this.setSelect('filter-year', s.filters.entryYear === null ? '' : String(s.filters.entryYear));
    this.setSelect('filter-income', s.filters.incomeBand ?? '');
    this.setSelect('filter-city', s.filters.birthCity ?? '');
    this.setSelect('filter-quota', s.filters.quotaType ?? '');
    this.setSelect('filter-school', s.filters.highSchoolType ?? '');
    this.setSelect('ranking-situation', s.rankingSituation);
    this.setSelect('ranking-order', s.rankingOrder);
    this.setSelect('failure-kind', s.failureKind);
    this.setSelect('category-group', s.categoryGroup);
    this.syncCategoryIndexOptions();
    this.setSelect('category-index', s.categoryIndex);
    const modeButton = this.control<HTMLButtonElement>('category-mode');
    if (modeButton) {
      const mode = chartModeFor(s, s.categoryGroup, s.categoryIndex);
      modeButton.dataset.mode = mode;
      modeButton.textContent = mode === 'pie' ? 'switch to bar' : 'switch to pie';
    }
    const crButton = this.control<HTMLButtonElement>('cr-display');
    if (crButton) {
      crButton.dataset.display = s.crDisplay;
      crButton.textContent = s.crDisplay === 'count' ? 'show percents' : 'show counts';
    }
    this.setSelect('discipline-order', s.disciplineOrder);
    const slider = this.control<HTMLInputElement>('discipline-limit');
    if (slider) {
      slider.value = String(s.disciplineLimit);
    }
    const output = this.root.querySelector<HTMLElement>('[data-role="limit-value"]');
    if (output) {
      output.textContent = String(s.disciplineLimit);
    }
  }
}
