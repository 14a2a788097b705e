#pragma once

#include <filesystem>
#include <string>

#include "brainalign/analyses.hpp"

namespace brainalign {

enum class ReportFormat { Json, Csv, Svg };

ReportFormat report_format_from_string(const std::string& text);
const char* extension(ReportFormat format) noexcept;

// JSON text for each result type. Doubles are printed with the shortest
// representation that round-trips; undefined values are null.
std::string to_json_text(const AlignmentReport& r);
std::string to_json_text(const LayerTimeResult& r);
std::string to_json_text(const TopoResult& r);
std::string to_json_text(const CategoryResult& r);
std::string to_json_text(const BenchmarkResult& r);
std::string to_json_text(const RdmResult& r);

AlignmentReport alignment_report_from_json(const std::string& text);
AlignmentReport load_alignment_report(const std::filesystem::path& path);

// CSV headers:
//   alignment   subject_id,pearson,spearman,cka,rsa,kendall,pearson_pooled,t,df,p_t,p_empirical
//   layer-time  layer_index,layer_name,window_start_ms,window_end_ms,rho        (subject mean grid)
//   topo        channel,region,window_start_ms,window_end_ms,r                 (channels × windows rows)
//   category    category,n,scored,mean,std
//   benchmark   task,n,slope,intercept,r_squared,p_value
std::string to_csv_text(const AlignmentReport& r);
std::string to_csv_text(const LayerTimeResult& r);
std::string to_csv_text(const TopoResult& r);
std::string to_csv_text(const CategoryResult& r);
std::string to_csv_text(const BenchmarkResult& r);

/// Topographic scatter: one <circle> per montage channel (montage order),
/// fill mapped from the channel's r averaged over windows.
std::string to_svg_text(const TopoResult& r);
/// Layer × window heat grid: one <rect> per cell of the mean grid.
std::string to_svg_text(const LayerTimeResult& r);

/// Writes `result` to `path` in `format`; unsupported combinations throw a
/// parameter error.
template <typename Result>
void export_report(const Result& result, const std::filesystem::path& path, ReportFormat format);

}  // namespace brainalign
