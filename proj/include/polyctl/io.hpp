#ifndef POLYCTL_IO_HPP
#define POLYCTL_IO_HPP

#include <string>

#include <json.hpp>

#include "polyctl/consistency.hpp"
#include "polyctl/data.hpp"
#include "polyctl/synth.hpp"
#include "polyctl/verify.hpp"

namespace polyctl::io {

using nlohmann::json;

std::string fnv1a64(const std::string& data);

json to_json(const Polynomial& p);
Polynomial polynomial_from_json(const json& j, int nvars);
json to_json(const PolyMatrix& m);
PolyMatrix polymatrix_from_json(const json& j, int nvars);
json to_json(const Eigen::MatrixXd& m);      // dense, row-major nested lists
Eigen::MatrixXd matrix_from_json(const json& j);

json to_json(const FunctionLibrary& lib);
FunctionLibrary library_from_json(const json& j);

/// Dataset CSV: header t,x1..xn,u1..um,xdot1..xdotn, one row per sample,
/// 17-significant-digit doubles so equal datasets are byte-identical.
std::string dataset_to_csv(const Dataset& ds);
Dataset dataset_from_csv(const std::string& csv, double delta);
json dataset_metadata(const Dataset& ds, const std::string& config_hash);

json to_json(const EllipsoidModel& m);
EllipsoidModel model_from_json(const json& j);

json to_json(const Certificate& c);
Certificate certificate_from_json(const json& j);

std::string trace_to_csv(const DissipationTrace& tr);

void write_file(const std::string& path, const std::string& contents);
std::string read_file(const std::string& path);

}  // namespace polyctl::io

#endif
