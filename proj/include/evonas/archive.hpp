#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "evonas/encoding.hpp"
#include "evonas/errors.hpp"
#include "evonas/io.hpp"

namespace evonas {

/// Both objectives are maximized. Axis order everywhere is
/// (introspectability, accuracy), matching the hypervolume reference (0, 1/N_C).
struct ObjectiveVector {
    double introspectability = 0.0;
    double accuracy = 0.0;

    bool operator==(const ObjectiveVector&) const = default;

    double operator[](int i) const { return i == 0 ? introspectability : accuracy; }
};

struct EvalMetrics {
    double train_accuracy = 0.0;
    double validation_accuracy = 0.0;
    std::int64_t param_count = 0;
    /// Deterministic compute cost of training: total MACs / 1e9. Proportional
    /// to wall clock on fixed hardware and reproducible bit-for-bit.
    double train_seconds = 0.0;

    double generalization_gap() const { return train_accuracy - validation_accuracy; }
};

enum class EvalStatus : std::uint8_t { Pending = 0, Ok = 1, Failed = 2 };

inline const char* to_string(EvalStatus s) {
    switch (s) {
        case EvalStatus::Pending: return "pending";
        case EvalStatus::Ok: return "ok";
        case EvalStatus::Failed: return "failed";
    }
    return "?";
}

struct Individual {
    std::int64_t id = -1;
    Encoding encoding;
    std::optional<ObjectiveVector> objectives;
    int generation = 0;
    std::vector<std::int64_t> parent_ids;  // 0 for generation 0, 1-2 otherwise
    EvalMetrics metrics;
    EvalStatus status = EvalStatus::Pending;

    bool evaluated() const { return objectives.has_value(); }
    const ObjectiveVector& obj() const {
        if (!objectives) throw ValidationError("individual " + std::to_string(id) + " not evaluated");
        return *objectives;
    }
};

/// Every evaluated individual plus the current population and its ranked fronts.
class ParetoArchive {
public:
    std::vector<Individual> individuals;             // ordered by id
    std::vector<std::int64_t> population;            // ids of the current population
    std::vector<std::vector<std::int64_t>> fronts;   // ranked fronts of the current population
    std::vector<std::vector<std::int64_t>> populations_by_generation;

    const Individual& by_id(std::int64_t id) const {
        auto it = index_.find(id);
        if (it == index_.end()) throw ValidationError("unknown individual id " + std::to_string(id));
        return individuals[it->second];
    }
    Individual& by_id(std::int64_t id) {
        return const_cast<Individual&>(static_cast<const ParetoArchive*>(this)->by_id(id));
    }

    bool contains_encoding(const Encoding& e) const { return encodings_.count(e) > 0; }

    void add(Individual ind) {
        if (encodings_.count(ind.encoding))
            throw ValidationError("duplicate encoding in archive: " + ind.encoding.str());
        index_[ind.id] = individuals.size();
        encodings_.insert(ind.encoding);
        individuals.push_back(std::move(ind));
    }

    size_t size() const { return individuals.size(); }

private:
    std::unordered_map<std::int64_t, size_t> index_;
    std::unordered_set<Encoding, EncodingHash> encodings_;
};

// ---------------------------------------------------------------------------
// CSV serialization. One row per individual; metric values use 6 significant
// digits; the encoding field is quoted because it contains commas.
// ---------------------------------------------------------------------------

inline const char* kArchiveHeader =
    "id,generation,parent_ids,encoding,introspectability,accuracy,"
    "train_accuracy,param_count,train_seconds,status";

inline std::string archive_row(const Individual& ind) {
    std::string parents;
    for (size_t i = 0; i < ind.parent_ids.size(); ++i) {
        if (i) parents += ';';
        parents += std::to_string(ind.parent_ids[i]);
    }
    const ObjectiveVector obj = ind.objectives.value_or(ObjectiveVector{});
    std::string row;
    row += std::to_string(ind.id);
    row += ',' + std::to_string(ind.generation);
    row += ',' + parents;
    row += ',' + csv_field(ind.encoding.str());
    row += ',' + fmt_g(obj.introspectability);
    row += ',' + fmt_g(obj.accuracy);
    row += ',' + fmt_g(ind.metrics.train_accuracy);
    row += ',' + std::to_string(ind.metrics.param_count);
    row += ',' + fmt_g(ind.metrics.train_seconds);
    row += ',';
    row += to_string(ind.status);
    return row;
}

inline std::string archive_csv(const ParetoArchive& archive) {
    std::string out = kArchiveHeader;
    out += '\n';
    for (const auto& ind : archive.individuals) {
        out += archive_row(ind);
        out += '\n';
    }
    return out;
}

inline Individual parse_archive_row(const std::string& line, int lineno) {
    auto f = csv_split(line);
    if (f.size() != 10)
        throw ParseError("archive line " + std::to_string(lineno) + ": expected 10 fields, got " +
                         std::to_string(f.size()));
    Individual ind;
    try {
        ind.id = parse_int(f[0], "id");
        ind.generation = static_cast<int>(parse_int(f[1], "generation"));
        if (!f[2].empty())
            for (const auto& p : split(f[2], ';')) ind.parent_ids.push_back(parse_int(p, "parent id"));
        ind.encoding = Encoding::parse(f[3]);
        ObjectiveVector obj{parse_double(f[4], "introspectability"), parse_double(f[5], "accuracy")};
        ind.metrics.train_accuracy = parse_double(f[6], "train_accuracy");
        ind.metrics.param_count = parse_int(f[7], "param_count");
        ind.metrics.train_seconds = parse_double(f[8], "train_seconds");
        ind.metrics.validation_accuracy = obj.accuracy;
        if (f[9] == "ok") ind.status = EvalStatus::Ok;
        else if (f[9] == "failed") ind.status = EvalStatus::Failed;
        else if (f[9] == "pending") ind.status = EvalStatus::Pending;
        else throw ParseError("unknown status '" + f[9] + "'");
        if (ind.status != EvalStatus::Pending) ind.objectives = obj;
    } catch (const std::exception& ex) {
        throw ParseError("archive line " + std::to_string(lineno) + ": " + ex.what());
    }
    return ind;
}

inline ParetoArchive parse_archive_csv(const std::string& text) {
    auto lines = to_lines(text);
    if (lines.empty() || lines[0] != kArchiveHeader)
        throw ParseError("archive line 1: bad or missing header");
    ParetoArchive archive;
    for (size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        archive.add(parse_archive_row(lines[i], static_cast<int>(i + 1)));
    }
    return archive;
}

inline std::string populations_csv(const ParetoArchive& archive) {
    std::string out = "generation,id\n";
    for (size_t g = 0; g < archive.populations_by_generation.size(); ++g)
        for (auto id : archive.populations_by_generation[g])
            out += std::to_string(g) + ',' + std::to_string(id) + '\n';
    return out;
}

inline std::vector<std::vector<std::int64_t>> parse_populations_csv(const std::string& text) {
    auto lines = to_lines(text);
    if (lines.empty() || lines[0] != "generation,id") throw ParseError("populations: bad header");
    std::vector<std::vector<std::int64_t>> gens;
    for (size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        auto f = split(lines[i], ',');
        if (f.size() != 2) throw ParseError("populations line " + std::to_string(i + 1));
        const auto g = static_cast<size_t>(parse_int(f[0], "generation"));
        if (gens.size() <= g) gens.resize(g + 1);
        gens[g].push_back(parse_int(f[1], "id"));
    }
    return gens;
}

}  // namespace evonas
