#include "bsdelab/serialization.hpp"

#include <cmath>

namespace bsdelab {

Json number_to_json(double x) {
    if (std::isnan(x)) return nullptr;
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    return x;
}

double number_from_json(const Json& j, const std::string& what) {
    if (j.is_null()) return kInf;
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf" || s == "+inf") return kInf;
        if (s == "-inf") return -kInf;
    }
    throw InvalidInput(what + ": expected a number, \"inf\" or null, got " + j.dump());
}

Json vector_to_json(const Vector& v) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(number_to_json(v(i)));
    return a;
}

Vector vector_from_json(const Json& j, const std::string& what) {
    if (!j.is_array()) return Vector::Constant(1, number_from_json(j, what));
    require(!j.empty(), what + ": empty vector");
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = number_from_json(j[i], what);
    return v;
}

Json measure_to_json(const LevyMeasure& m) {
    if (m.is_atomic()) {
        Json atoms = Json::array();
        for (const auto& a : m.atomic_part().atoms) {
            Json u = a.mark.size() == 1 ? number_to_json(a.mark(0)) : vector_to_json(a.mark);
            atoms.push_back({{"u", u}, {"w", number_to_json(a.weight)}});
        }
        return {{"type", "atomic"}, {"atoms", atoms}};
    }
    const auto& pl = m.power_law_part();
    return {{"type", "powerlaw"},
            {"alpha", number_to_json(pl.alpha)},
            {"cutoff", number_to_json(pl.cutoff)},
            {"truncation", number_to_json(pl.truncation)}};
}

LevyMeasure measure_from_json(const Json& j) {
    require(j.is_object() && j.contains("type"), "measure: expected an object with a \"type\" field");
    const auto type = j.at("type").get<std::string>();
    if (type == "atomic") {
        require(j.contains("atoms") && j.at("atoms").is_array(), "measure: atomic needs an \"atoms\" array");
        std::vector<Atom> atoms;
        for (const auto& a : j.at("atoms")) {
            require(a.is_object() && a.contains("u") && a.contains("w"), "measure: each atom needs \"u\" and \"w\"");
            atoms.push_back({vector_from_json(a.at("u"), "atom mark"), number_from_json(a.at("w"), "atom weight")});
        }
        return LevyMeasure::atomic(std::move(atoms));
    }
    if (type == "powerlaw") {
        require(j.contains("alpha"), "measure: powerlaw needs \"alpha\"");
        const double cutoff = j.contains("cutoff") ? number_from_json(j.at("cutoff"), "cutoff") : kInf;
        const double trunc = j.contains("truncation") ? number_from_json(j.at("truncation"), "truncation") : 0.0;
        return LevyMeasure::power_law(number_from_json(j.at("alpha"), "alpha"), cutoff, trunc);
    }
    throw InvalidInput("measure: unknown type \"" + type + "\" (expected atomic or powerlaw)");
}

Json mark_function_to_json(const MarkFunction& f) {
    if (f.is_atomic()) {
        Json values = Json::array();
        const Matrix& v = f.values();
        for (Eigen::Index j = 0; j < v.cols(); ++j)
            values.push_back(v.rows() == 1 ? number_to_json(v(0, j)) : vector_to_json(v.col(j)));
        return {{"type", "atoms"}, {"values", values}};
    }
    const auto& pf = f.power_form();
    return {{"type", "power"},
            {"coeff", vector_to_json(pf.coeff)},
            {"band", {number_to_json(pf.band_lo), number_to_json(pf.band_hi)}}};
}

MarkFunction mark_function_from_json(const Json& j) {
    require(j.is_object() && j.contains("type"), "function: expected an object with a \"type\" field");
    const auto type = j.at("type").get<std::string>();
    if (type == "atoms") {
        require(j.contains("values") && j.at("values").is_array() && !j.at("values").empty(),
                "function: atoms needs a non-empty \"values\" array");
        const auto& vals = j.at("values");
        const Vector first = vector_from_json(vals[0], "function value");
        Matrix m(first.size(), static_cast<Eigen::Index>(vals.size()));
        for (std::size_t i = 0; i < vals.size(); ++i) {
            const Vector v = vector_from_json(vals[i], "function value");
            require(v.size() == first.size(), "function: values must share one dimension");
            m.col(static_cast<Eigen::Index>(i)) = v;
        }
        return MarkFunction::atoms(std::move(m));
    }
    if (type == "power") {
        require(j.contains("coeff"), "function: power needs \"coeff\"");
        double lo = 0.0, hi = kInf;
        if (j.contains("band")) {
            const auto& b = j.at("band");
            require(b.is_array() && b.size() == 2, "function: band must be [lo, hi]");
            lo = number_from_json(b[0], "band");
            hi = number_from_json(b[1], "band");
        }
        return MarkFunction::power(vector_from_json(j.at("coeff"), "coeff"), lo, hi);
    }
    throw InvalidInput("function: unknown type \"" + type + "\" (expected atoms or power)");
}

}  // namespace bsdelab
