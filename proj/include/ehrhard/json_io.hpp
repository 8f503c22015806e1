#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "ehrhard/alpha.hpp"
#include "ehrhard/grid.hpp"
#include "ehrhard/regions.hpp"
#include "json.hpp"

namespace ehrhard {

using Json = nlohmann::json;

// Sorted keys, doubles at 17 significant digits, non-finite values as "+inf", "-inf", "nan".
std::string dump_json(const Json& j, int indent = 2);

Json number_json(double v);
// Accepts numbers and the strings written by number_json.
double json_number(const Json& j);
std::vector<double> json_number_list(const Json& j);

Json matrix_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd json_matrix(const Json& j);
Json vector_json(const Eigen::VectorXd& v);
Eigen::VectorXd json_vector(const Json& j);

Json region_json(const RegionSet& r);
RegionSet json_region(const Json& j);

Json certificate_json(const EllipticCertificate& c);

// "lo:hi:count" per axis, comma separated.
GridGeometry parse_grid_spec(const std::string& spec);
std::string grid_spec(const GridGeometry& g);

}  // namespace ehrhard
