#pragma once

// JSON forms of measures and mark functions.
//
//   {"type": "atomic", "atoms": [{"u": 1.0, "w": 2.0}, {"u": [0.5, -1], "w": 0.1}]}
//   {"type": "powerlaw", "alpha": 1.5, "cutoff": "inf", "truncation": 0.1}
//   {"type": "atoms", "values": [1.0, [2.0, 0.5]]}      one entry per atom, scalar or R^d
//   {"type": "power", "coeff": [1.0], "band": [0, "inf"]}
//
// Non-finite numbers are written as the strings "inf" / "-inf"; null reads as +inf.

#include "bsdelab/levy_measure.hpp"

#include <json.hpp>

namespace bsdelab {

using Json = nlohmann::json;

Json number_to_json(double x);
double number_from_json(const Json& j, const std::string& what);

Json vector_to_json(const Vector& v);
Vector vector_from_json(const Json& j, const std::string& what);

Json measure_to_json(const LevyMeasure& m);
LevyMeasure measure_from_json(const Json& j);

Json mark_function_to_json(const MarkFunction& f);
MarkFunction mark_function_from_json(const Json& j);

}  // namespace bsdelab
