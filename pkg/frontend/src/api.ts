// Typed client for the retention analytics HTTP API. The payload shapes
// mirror the service's JSON verbatim; the dashboard renders these numbers
// as received and never recomputes an aggregate on its own.

export interface Envelope<T> {
  snapshot_version: number;
  data: T;
  note?: string;
}

export interface DistributionEntry {
  label: string;
  count: number;
  percent: number;
}

export interface Distribution {
  entries: DistributionEntry[];
  total: number;
  excluded_undefined: number;
}

export interface CourseCount {
  course_id: string;
  count: number;
}

export interface CourseRanking {
  entries: CourseCount[];
}

export interface TdaEntry {
  course_name: string;
  institution_tda: number | null;
  national_tda: number | null;
}

export interface TdaReferences {
  institution_avg: number | null;
  national_avg: number | null;
  state_avg: number | null;
}

export interface TdaHistogram {
  entries: TdaEntry[];
  references: TdaReferences;
  warnings: string[];
}

export interface HistogramBin {
  failures: number;
  students: number;
}

export interface FailureHistogram {
  bins: HistogramBin[];
}

export interface DisciplineEntry {
  course_id: string;
  discipline_id: string;
  enrolled_count: number;
  failure_count: number;
  failure_rate: number;
}

export interface DisciplineReferences {
  institution_avg_rate: number | null;
  course_avg_rate: number | null;
}

export interface DisciplineRanking {
  entries: DisciplineEntry[];
  references: DisciplineReferences;
}

export interface Meta {
  courses: string[];
  entry_years: number[];
  filter_values: {
    income_band: string[];
    birth_city: string[];
    quota_type: string[];
    high_school_type: string[];
  };
  category_groups: { [group: string]: string[] };
  situations: string[];
  not_informed_label: string;
  ingest: {
    rows_read: number;
    rows_kept: number;
    rows_deduplicated: number;
    rows_rejected: number;
    students_built: number;
    cohorts_kept: number;
  };
}

export interface FilterSelection {
  course: string | null;
  entryYear: number | null;
  incomeBand: string | null;
  birthCity: string | null;
  quotaType: string | null;
  highSchoolType: string | null;
}

export function emptyFilters(): FilterSelection {
  return {
    course: null,
    entryYear: null,
    incomeBand: null,
    birthCity: null,
    quotaType: null,
    highSchoolType: null,
  };
}

export class ApiRequestError extends Error {
  readonly status: number;
  readonly code: string;

  constructor(status: number, code: string, message: string) {
    super(message);
    this.status = status;
    this.code = code;
  }
}

function query(params: { [key: string]: string | null }): string {
  const search = new URLSearchParams();
  for (const [key, value] of Object.entries(params)) {
    if (value !== null && value !== '') {
      search.set(key, value);
    }
  }
  const text = search.toString();
  return text ? `?${text}` : '';
}

function filterParams(filters: FilterSelection): { [key: string]: string | null } {
  return {
    course: filters.course,
    entry_year: filters.entryYear === null ? null : String(filters.entryYear),
    income_band: filters.incomeBand,
    birth_city: filters.birthCity,
    quota_type: filters.quotaType,
    high_school_type: filters.highSchoolType,
  };
}

export class ApiClient {
  private readonly base: string;

  constructor(baseUrl: string) {
    this.base = baseUrl.replace(/\/+$/, '');
  }

  private async get<T>(path: string): Promise<Envelope<T>> {
    const response = await fetch(`${this.base}${path}`, {
      headers: { Accept: 'application/json' },
    });
    const body: unknown = await response.json();
    if (!response.ok) {
      const fail = (body as { error?: { code?: string; message?: string } }).error;
      throw new ApiRequestError(
        response.status,
        fail?.code ?? 'unknown',
        fail?.message ?? `HTTP ${response.status}`,
      );
    }
    return body as Envelope<T>;
  }

  meta(): Promise<Envelope<Meta>> {
    return this.get('/api/v1/meta');
  }

  situations(filters: FilterSelection): Promise<Envelope<Distribution>> {
    return this.get(`/api/v1/overview/situations${query(filterParams(filters))}`);
  }

  courseRanking(situation: string, order: string): Promise<Envelope<CourseRanking>> {
    return this.get(`/api/v1/overview/course-ranking${query({ situation, order })}`);
  }

  tdaHistogram(): Promise<Envelope<TdaHistogram>> {
    return this.get('/api/v1/tda/histogram');
  }

  attendanceBands(course: string | null): Promise<Envelope<Distribution>> {
    return this.get(`/api/v1/dropouts/attendance-bands${query({ course })}`);
  }

  crBands(course: string | null): Promise<Envelope<Distribution>> {
    return this.get(`/api/v1/dropouts/cr-bands${query({ course })}`);
  }

  failureHistogram(course: string | null, kind: string): Promise<Envelope<FailureHistogram>> {
    return this.get(`/api/v1/dropouts/failure-histogram${query({ course, kind })}`);
  }

  categories(
    group: string,
    index: string,
    course: string | null,
  ): Promise<Envelope<Distribution>> {
    return this.get(`/api/v1/dropouts/categories${query({ group, index, course })}`);
  }

  disciplineRanking(
    course: string | null,
    order: string,
    limit: number,
  ): Promise<Envelope<DisciplineRanking>> {
    return this.get(`/api/v1/disciplines/ranking${query({ course, order, limit: String(limit) })}`);
  }
}
