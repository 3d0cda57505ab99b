#pragma once

#include <string>

#include "emtsim/analysis.hpp"
#include "emtsim/studies.hpp"

namespace emtsim {

/// Aligned plain-text validation table (one row per expected metric), the
/// stress table when present, and the analytic notes. Deterministic byte
/// output for golden-file comparison.
std::string render_report_text(const ValidationReport& report);

/// Same content as a stable-key-order JSON document.
std::string render_report_json(const ValidationReport& report);

/// Study manifest (probes, bases, expected metrics, ratings) as JSON; the
/// shipped cases/<name>_manifest.json files are exactly this output.
std::string render_manifest_json(const CaseDefinition& def);

/// CSV with header `time_s,<label>`; numbers in shortest exact form so
/// re-parsing reproduces the samples bit-for-bit.
std::string render_waveform_csv(const Waveform& w);

/// CSV with header `frequency_hz,magnitude`.
std::string render_spectrum_csv(const Spectrum& s);

}  // namespace emtsim
