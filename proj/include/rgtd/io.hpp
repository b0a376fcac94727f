#pragma once

// JSON serialization of evaluation problems.
//
//   {
//     "n_states": S, "n_actions": A, "gamma": g,
//     "transition": [s][a][s'], "reward": [s][a][s'],
//     "phi": [s][j], "target": [s][a], "behavior": [s][a], "dist": [s],
//     "rank_deficient_features": false          (optional)
//   }
//
// Doubles are written with the shortest representation that round-trips, so
// write -> read reproduces every value bit for bit.

#include "rgtd/error.hpp"
#include "rgtd/mdp.hpp"

#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace rgtd::io {

using Json = nlohmann::json;

namespace detail {

inline Json matrix_to_json(const Matrix& m) {
    Json out = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        Json row = Json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        out.push_back(std::move(row));
    }
    return out;
}

inline Json vector_to_json(const Vector& v) {
    Json out = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

inline const Json& field(const Json& j, const std::string& name) {
    if (!j.is_object()) throw DataError("problem: expected a JSON object at top level");
    auto it = j.find(name);
    if (it == j.end()) throw DataError("problem: missing field '" + name + "'");
    return *it;
}

inline double number(const Json& j, const std::string& where) {
    if (!j.is_number()) throw DataError(where + ": expected a number");
    return j.get<double>();
}

inline int positive_int(const Json& j, const std::string& where) {
    if (!j.is_number_integer() || j.get<long long>() <= 0) throw DataError(where + ": expected a positive integer");
    return j.get<int>();
}

inline Vector vector_from_json(const Json& j, Eigen::Index n, const std::string& where) {
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != n)
        throw DataError(where + ": expected an array of length " + std::to_string(n));
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = number(j[i], where + "[" + std::to_string(i) + "]");
    return v;
}

inline Matrix matrix_from_json(const Json& j, Eigen::Index rows, Eigen::Index cols, const std::string& where) {
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows)
        throw DataError(where + ": expected " + std::to_string(rows) + " rows");
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) m.row(r) = vector_from_json(j[r], cols, where + "[" + std::to_string(r) + "]");
    return m;
}

inline Matrix matrix_from_json_any_cols(const Json& j, Eigen::Index rows, const std::string& where) {
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows || rows == 0 || !j[0].is_array())
        throw DataError(where + ": expected " + std::to_string(rows) + " rows");
    return matrix_from_json(j, rows, static_cast<Eigen::Index>(j[0].size()), where);
}

inline std::string parse_context(const std::string& text, std::size_t byte) {
    const auto end = text.begin() + static_cast<std::ptrdiff_t>(std::min(byte, text.size()));
    const auto line = 1 + std::count(text.begin(), end, '\n');
    return "line " + std::to_string(line);
}

}  // namespace detail

inline Json to_json(const EvalProblem& problem) {
    const auto& mdp = problem.mdp();
    const int n = mdp.n_states(), na = mdp.n_actions();
    Json transition = Json::array(), reward = Json::array();
    for (int s = 0; s < n; ++s) {
        Json ts = Json::array(), rs = Json::array();
        for (int a = 0; a < na; ++a) {
            ts.push_back(detail::vector_to_json(mdp.transition(a).row(s).transpose()));
            rs.push_back(detail::vector_to_json(mdp.reward(a).row(s).transpose()));
        }
        transition.push_back(std::move(ts));
        reward.push_back(std::move(rs));
    }
    Json j;
    j["n_states"] = n;
    j["n_actions"] = na;
    j["gamma"] = mdp.gamma();
    j["transition"] = std::move(transition);
    j["reward"] = std::move(reward);
    j["phi"] = detail::matrix_to_json(problem.phi());
    j["target"] = detail::matrix_to_json(problem.target().probs());
    j["behavior"] = detail::matrix_to_json(problem.behavior().probs());
    j["dist"] = detail::vector_to_json(problem.dist().d());
    if (!problem.features().full_column_rank()) j["rank_deficient_features"] = true;
    return j;
}

inline EvalProblem problem_from_json(const Json& j) {
    using namespace detail;
    const int n = positive_int(field(j, "n_states"), "n_states");
    const int na = positive_int(field(j, "n_actions"), "n_actions");
    const double gamma = number(field(j, "gamma"), "gamma");

    const Json& jt = field(j, "transition");
    const Json& jr = field(j, "reward");
    std::vector<Matrix> transition(na, Matrix(n, n)), reward(na, Matrix(n, n));
    for (const auto* name : {"transition", "reward"}) {
        const Json& src = std::string(name) == "transition" ? jt : jr;
        if (!src.is_array() || static_cast<int>(src.size()) != n)
            throw DataError(std::string(name) + ": expected " + std::to_string(n) + " states");
        for (int s = 0; s < n; ++s) {
            const std::string where = std::string(name) + "[" + std::to_string(s) + "]";
            const Matrix block = matrix_from_json(src[s], na, n, where);
            auto& dst = std::string(name) == "transition" ? transition : reward;
            for (int a = 0; a < na; ++a) dst[a].row(s) = block.row(a);
        }
    }

    const bool deficient = j.contains("rank_deficient_features") && j["rank_deficient_features"].is_boolean() &&
                           j["rank_deficient_features"].get<bool>();
    Matrix phi = matrix_from_json_any_cols(field(j, "phi"), n, "phi");
    Matrix target = matrix_from_json(field(j, "target"), n, na, "target");
    Matrix behavior = matrix_from_json(field(j, "behavior"), n, na, "behavior");
    Vector dist = vector_from_json(field(j, "dist"), n, "dist");

    return EvalProblem(TabularMdp(std::move(transition), std::move(reward), gamma), Policy(std::move(target)),
                       Policy(std::move(behavior)),
                       FeatureMap(std::move(phi), deficient ? RankRequirement::allow_deficient
                                                            : RankRequirement::full_column_rank),
                       StateDistribution(std::move(dist)));
}

inline Json parse_json_text(const std::string& text, const std::string& source) {
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw DataError(source + ": " + detail::parse_context(text, e.byte) + ": " + e.what());
    }
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Writes via a temporary sibling file and a rename, so readers never see a
/// half-written file.
inline void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write " + tmp.string());
        out << text;
        if (!out) throw DataError("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline EvalProblem read_problem(const std::filesystem::path& path) {
    const Json j = parse_json_text(read_text(path), path.string());
    try {
        return problem_from_json(j);
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

inline void write_problem(const std::filesystem::path& path, const EvalProblem& problem) {
    write_text_atomic(path, to_json(problem).dump(1) + "\n");
}

}  // namespace rgtd::io
