#pragma once

#include "atlasgp/baselines.hpp"

#include <json.hpp>

#include <string>

namespace atlasgp {

using Json = nlohmann::json;

/// Serializes with doubles at 17 significant digits; key order is preserved as sorted.
std::string dump_json(const Json& j, int indent = 1);

/// 64-bit FNV-1a of a byte string, as 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);

/// Digest of an artifact, ignoring its own "digest" field.
std::string artifact_digest(const Json& j);

/// Adds the digest and writes the artifact.
void write_artifact(const std::string& path, Json j);
/// Reads an artifact and checks its kind and digest.
Json read_artifact(const std::string& path, const std::string& kind);

std::string format_double(double v);

PointCloud read_cloud_csv(const std::string& path);
void write_cloud_csv(const std::string& path, const PointCloud& cloud);

struct Labeled {
    IdList ids;
    Vector y;
};
Labeled read_labeled_csv(const std::string& path);
void write_labeled_csv(const std::string& path, const Labeled& data);
IdList read_ids_csv(const std::string& path);

/// CSV with a "# " JSON header line, then id,mean,variance rows.
void write_predictions_csv(const std::string& path, const Json& header, const IdList& ids,
                           const MarginalPrediction& pred);

/// CSV with a "# " JSON header line, then one row per recorded step.
void write_paths_csv(const std::string& path, const Json& header, const std::vector<BmPath>& paths, int per_start);

Json to_json(const Matrix& m);
Json to_json(const Vector& v);
Matrix matrix_from_json(const Json& j);
Vector vector_from_json(const Json& j);

Json cover_to_json(const Cover& cover);
Cover cover_from_json(const Json& j);

Json chart_to_json(const Chart& chart);
Chart chart_from_json(const Json& j);

Json atlas_to_json(const Atlas& atlas, int n_points);
Atlas atlas_from_json(const Json& j);

Json grid_to_json(const HeatKernelGrid& grid);
HeatKernelGrid grid_from_json(const Json& j);

Json rc_model_to_json(const RcAgpModel& m);
RcAgpModel rc_model_from_json(const Json& j);

Json s_model_to_json(const SAgpModel& m);
SAgpModel s_model_from_json(const Json& j);

Json euclid_model_to_json(const EuclideanGp& m, const PointCloud& cloud, const IdList& ids);
EuclideanGp euclid_model_from_json(const Json& j, PointCloud& cloud);

Json gl_model_to_json(const GlGp& m, const PointCloud& cloud);
GlGp gl_model_from_json(const Json& j, PointCloud& cloud);

} // namespace atlasgp
