#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

namespace afsl {

using SampleId = std::int64_t;
using LabelIndexSet = std::vector<int>;  // sorted ascending, distinct

/// Optional map from label index to a single vocabulary token id, plus the
/// substitutions applied to multi-token label names. Produced by whoever
/// prepares a dataset for a real trainer; the engine only transports it.
struct LabelVocabMap {
    std::vector<std::int64_t> token_ids;                 // one per label, injective
    std::map<std::string, std::string> substitutions;    // original -> single-token name
};

/// The ordered label universe. Order is fixed and defines the class index.
struct LabelSet {
    std::vector<std::string> labels;
    bool multi_label = false;
    std::optional<LabelVocabMap> vocab;

    std::size_t size() const { return labels.size(); }

    int index_of(const std::string& name) const {
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == name) return static_cast<int>(i);
        return -1;
    }

    void validate() const {
        if (labels.size() < 2)
            throw std::invalid_argument("LabelSet: need at least 2 labels");
        std::set<std::string> seen;
        for (const auto& l : labels) {
            if (l.empty()) throw std::invalid_argument("LabelSet: empty label name");
            if (!seen.insert(l).second)
                throw std::invalid_argument("LabelSet: duplicate label '" + l + "'");
        }
        if (vocab) {
            if (vocab->token_ids.size() != labels.size())
                throw std::invalid_argument("LabelSet: vocab map must cover every label exactly once");
            std::set<std::int64_t> ids(vocab->token_ids.begin(), vocab->token_ids.end());
            if (ids.size() != vocab->token_ids.size())
                throw std::invalid_argument("LabelSet: vocab token ids must be injective");
        }
    }
};

struct Sample {
    SampleId id = 0;
    std::string text;
    LabelIndexSet gold_labels;
};

struct DatasetSplits {
    LabelSet label_set;
    std::vector<Sample> train;
    std::vector<Sample> validation;
    std::vector<Sample> test;

    const std::vector<Sample>& split(const std::string& name) const {
        if (name == "train") return train;
        if (name == "validation") return validation;
        if (name == "test") return test;
        throw std::invalid_argument("unknown split '" + name + "'");
    }

    std::vector<const Sample*> all_samples() const {
        std::vector<const Sample*> out;
        out.reserve(train.size() + validation.size() + test.size());
        for (const auto* split : {&train, &validation, &test})
            for (const auto& s : *split) out.push_back(&s);
        return out;
    }

    const Sample& by_id(SampleId id) const {
        build_index();
        auto it = index_.find(id);
        if (it == index_.end())
            throw std::out_of_range("no sample with id " + std::to_string(id));
        return *it->second;
    }

private:
    void build_index() const {
        if (!index_.empty() || (train.empty() && validation.empty() && test.empty())) return;
        for (const auto* s : all_samples()) index_.emplace(s->id, s);
    }
    mutable std::unordered_map<SampleId, const Sample*> index_;
};

/// Partition of the train split into not-yet-labeled pool and the acquired
/// support set. Support order is acquisition order, append-only.
class PoolState {
public:
    PoolState() = default;

    explicit PoolState(const std::vector<Sample>& train) {
        pool_.reserve(train.size());
        for (const auto& s : train) {
            pool_.push_back(s.id);
            original_.insert(s.id);
        }
    }

    const std::vector<SampleId>& unlabeled_ids() const { return pool_; }
    const std::vector<std::pair<SampleId, LabelIndexSet>>& support() const { return support_; }
    std::size_t support_size() const { return support_.size(); }

    /// Moves ids from the pool into the support set with their labels.
    void acquire(const std::vector<SampleId>& ids, const std::vector<LabelIndexSet>& labels) {
        if (ids.size() != labels.size())
            throw std::invalid_argument("PoolState::acquire: ids/labels length mismatch");
        std::unordered_set<SampleId> moving(ids.begin(), ids.end());
        if (moving.size() != ids.size())
            throw std::invalid_argument("PoolState::acquire: duplicate ids");
        for (SampleId id : ids)
            if (std::find(pool_.begin(), pool_.end(), id) == pool_.end())
                throw std::invalid_argument("PoolState::acquire: id " + std::to_string(id) +
                                            " not in the unlabeled pool");
        std::vector<SampleId> remaining;
        remaining.reserve(pool_.size() - ids.size());
        for (SampleId id : pool_)
            if (!moving.count(id)) remaining.push_back(id);
        pool_ = std::move(remaining);
        for (std::size_t i = 0; i < ids.size(); ++i) support_.emplace_back(ids[i], labels[i]);
    }

    /// Partition invariant: support and pool are disjoint and jointly cover
    /// the original train ids.
    bool partition_holds() const {
        std::unordered_set<SampleId> seen;
        for (SampleId id : pool_)
            if (!seen.insert(id).second) return false;
        for (const auto& [id, _] : support_)
            if (!seen.insert(id).second) return false;
        if (seen.size() != original_.size()) return false;
        for (SampleId id : seen)
            if (!original_.count(id)) return false;
        return true;
    }

private:
    std::vector<SampleId> pool_;
    std::vector<std::pair<SampleId, LabelIndexSet>> support_;
    std::unordered_set<SampleId> original_;
};

struct DatasetStats {
    std::vector<double> label_frequencies;
    double uniformity = 0.0;
};

// ---------------------------------------------------------------------------
// Label statistics
// ---------------------------------------------------------------------------

/// Relative label frequencies and the imbalance measure
/// U = sum_l |f(l) - 1/|L||. f(l) = occurrences of l / number of records,
/// which reduces to count/total for single-label data.
inline DatasetStats uniformity(const std::vector<LabelIndexSet>& records, const LabelSet& label_set) {
    if (records.empty()) throw std::invalid_argument("uniformity: empty input");
    const std::size_t n = label_set.size();
    std::vector<std::int64_t> counts(n, 0);
    for (const auto& rec : records)
        for (int l : rec) {
            if (l < 0 || static_cast<std::size_t>(l) >= n)
                throw std::out_of_range("uniformity: label index " + std::to_string(l) +
                                        " outside the label set");
            ++counts[static_cast<std::size_t>(l)];
        }
    DatasetStats stats;
    stats.label_frequencies.resize(n);
    const double denom = static_cast<double>(records.size());
    const double even = 1.0 / static_cast<double>(n);
    long double u = 0.0L;
    for (std::size_t i = 0; i < n; ++i) {
        stats.label_frequencies[i] = static_cast<double>(counts[i]) / denom;
        u += std::fabs(static_cast<long double>(stats.label_frequencies[i]) - even);
    }
    stats.uniformity = static_cast<double>(u);
    return stats;
}

namespace detail {
inline std::int64_t count_micro_tp(const LabelIndexSet& gold, const LabelIndexSet& pred) {
    std::int64_t tp = 0;
    for (int p : pred)
        if (std::find(gold.begin(), gold.end(), p) != gold.end()) ++tp;
    return tp;
}
}  // namespace detail

/// Micro-F1 of the constant predictor that always emits the most frequent
/// train label (ties toward the lowest label index).
inline double majority_baseline(const std::vector<LabelIndexSet>& train_labels,
                                const std::vector<LabelIndexSet>& test_labels) {
    if (train_labels.empty() || test_labels.empty())
        throw std::invalid_argument("majority_baseline: empty input");
    std::map<int, std::int64_t> counts;
    for (const auto& rec : train_labels)
        for (int l : rec) ++counts[l];
    int majority = -1;
    std::int64_t best = -1;
    for (const auto& [label, count] : counts)  // map order => lowest index wins ties
        if (count > best) {
            best = count;
            majority = label;
        }
    std::int64_t tp = 0, fp = 0, fn = 0;
    const LabelIndexSet pred{majority};
    for (const auto& gold : test_labels) {
        const std::int64_t t = detail::count_micro_tp(gold, pred);
        tp += t;
        fp += static_cast<std::int64_t>(pred.size()) - t;
        fn += static_cast<std::int64_t>(gold.size()) - t;
    }
    const std::int64_t denom = 2 * tp + fp + fn;
    return denom == 0 ? 0.0 : static_cast<double>(2 * tp) / static_cast<double>(denom);
}

// ---------------------------------------------------------------------------
// File format: one JSON object per line. The first line is a header record
// declaring the ordered label list and the multi-label flag; every following
// line is a sample record {id, text, labels[], split}.
// ---------------------------------------------------------------------------

inline std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);  // shortest round-trip form
    (void)ec;
    return std::string(buf, ptr);
}

inline std::string encode_features(const std::vector<double>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ' ';
        out += format_double(values[i]);
    }
    return out;
}

inline std::vector<double> decode_features(const std::string& text) {
    std::vector<double> out;
    std::istringstream in(text);
    std::string tok;
    while (in >> tok) {
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc() || ptr != tok.data() + tok.size())
            throw std::invalid_argument("decode_features: '" + tok + "' is not a number");
        out.push_back(v);
    }
    return out;
}

namespace detail {

[[noreturn]] inline void load_error(std::size_t line_no, const std::string& what) {
    throw std::runtime_error("dataset line " + std::to_string(line_no) + ": " + what);
}

inline LabelSet parse_header(const nlohmann::json& j, std::size_t line_no) {
    LabelSet ls;
    if (!j.is_object() || !j.contains("labels") || !j["labels"].is_array())
        load_error(line_no, "expected a header record with a 'labels' array");
    for (const auto& l : j["labels"]) ls.labels.push_back(l.get<std::string>());
    ls.multi_label = j.value("multi_label", false);
    if (j.contains("class_token_ids")) {
        LabelVocabMap vm;
        vm.token_ids = j["class_token_ids"].get<std::vector<std::int64_t>>();
        if (j.contains("single_token_substitutions"))
            vm.substitutions =
                j["single_token_substitutions"].get<std::map<std::string, std::string>>();
        ls.vocab = std::move(vm);
    }
    try {
        ls.validate();
    } catch (const std::exception& e) {
        load_error(line_no, e.what());
    }
    return ls;
}

}  // namespace detail

inline DatasetSplits load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset file '" + path + "'");

    DatasetSplits ds;
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    std::unordered_set<SampleId> seen_ids;

    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            detail::load_error(line_no, std::string("malformed record: ") + e.what());
        }
        if (!have_header) {
            ds.label_set = detail::parse_header(j, line_no);
            have_header = true;
            continue;
        }
        if (!j.is_object() || !j.contains("id") || !j.contains("text") || !j.contains("labels") ||
            !j.contains("split"))
            detail::load_error(line_no, "record must have id, text, labels, split fields");

        Sample s;
        try {
            s.id = j["id"].get<SampleId>();
            s.text = j["text"].get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            detail::load_error(line_no, std::string("malformed record: ") + e.what());
        }
        if (s.id < 0) detail::load_error(line_no, "id must be non-negative");
        if (!seen_ids.insert(s.id).second)
            detail::load_error(line_no, "duplicate id " + std::to_string(s.id));

        for (const auto& name : j["labels"]) {
            const int idx = ds.label_set.index_of(name.get<std::string>());
            if (idx < 0)
                detail::load_error(line_no,
                                   "unknown label name '" + name.get<std::string>() + "'");
            s.gold_labels.push_back(idx);
        }
        std::sort(s.gold_labels.begin(), s.gold_labels.end());
        s.gold_labels.erase(std::unique(s.gold_labels.begin(), s.gold_labels.end()),
                            s.gold_labels.end());
        if (s.gold_labels.empty()) detail::load_error(line_no, "sample has no labels");
        if (!ds.label_set.multi_label && s.gold_labels.size() != 1)
            detail::load_error(line_no, "single-label dataset but sample " +
                                            std::to_string(s.id) + " has " +
                                            std::to_string(s.gold_labels.size()) + " labels");

        const std::string split = j["split"].get<std::string>();
        if (split == "train")
            ds.train.push_back(std::move(s));
        else if (split == "validation" || split == "val")
            ds.validation.push_back(std::move(s));
        else if (split == "test")
            ds.test.push_back(std::move(s));
        else
            detail::load_error(line_no, "unknown split '" + split + "'");
    }
    if (!have_header) throw std::runtime_error("dataset file '" + path + "' is empty");
    if (ds.train.empty()) throw std::runtime_error("dataset has an empty train split");
    if (ds.validation.empty()) throw std::runtime_error("dataset has an empty validation split");
    if (ds.test.empty()) throw std::runtime_error("dataset has an empty test split");
    return ds;
}

inline void save_dataset(const DatasetSplits& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);  // binary: byte-stable line endings
    if (!out) throw std::runtime_error("cannot write dataset file '" + path + "'");
    nlohmann::json header;
    header["labels"] = ds.label_set.labels;
    header["multi_label"] = ds.label_set.multi_label;
    if (ds.label_set.vocab) {
        header["class_token_ids"] = ds.label_set.vocab->token_ids;
        if (!ds.label_set.vocab->substitutions.empty())
            header["single_token_substitutions"] = ds.label_set.vocab->substitutions;
    }
    out << header.dump() << '\n';
    auto emit = [&](const std::vector<Sample>& split, const char* name) {
        for (const auto& s : split) {
            nlohmann::json j;
            j["id"] = s.id;
            j["text"] = s.text;
            auto names = nlohmann::json::array();
            for (int l : s.gold_labels) names.push_back(ds.label_set.labels[l]);
            j["labels"] = names;
            j["split"] = name;
            out << j.dump() << '\n';
        }
    };
    emit(ds.train, "train");
    emit(ds.validation, "validation");
    emit(ds.test, "test");
}

}  // namespace afsl
