// Copyright (c) 2026, The bayeslora authors
// SPDX-License-Identifier: Apache-2.0
//

#include "bayeslora/data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_set>

#include "bayeslora/error.hpp"
#include "bayeslora/format.hpp"

namespace bayeslora {

namespace {

constexpr std::size_t kMaxIdLength = 20;
// Latent coordinates are drawn from N(kLatentMean, 1): a shared positive offset makes
// part of the interaction signal additive in per-protein features.
constexpr double kLatentMean = 2.0;
constexpr std::size_t kMaxCodeLetters = 4;
// Each leading latent coordinate is spelled as one of kLevels letters (its normal quantile bin).
constexpr int kLevels = 8;

bool valid_id_char(char c) {
    return (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
}

std::pair<std::string, std::string> unordered_key(const PairExample& ex) {
    return ex.a.str() < ex.b.str() ? std::pair{ex.a.str(), ex.b.str()} : std::pair{ex.b.str(), ex.a.str()};
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace

ProteinId::ProteinId(std::string value) : value_(std::move(value)) {
    if (value_.empty() || value_.size() > kMaxIdLength) {
        throw ValidationError("protein identifier '" + value_ + "' must have 1-20 characters");
    }
    for (char c : value_) {
        if (!valid_id_char(c)) {
            throw ValidationError("protein identifier '" + value_ + "' contains '" + std::string(1, c) +
                                  "' (allowed: A-Z 0-9 _)");
        }
    }
}

std::size_t Dataset::positives() const noexcept {
    return static_cast<std::size_t>(
        std::count_if(examples.begin(), examples.end(), [](const PairExample& e) { return e.label == 1; }));
}

void validate_dataset(const Dataset& ds) {
    std::set<std::pair<std::string, std::string>> seen;
    for (std::size_t i = 0; i < ds.examples.size(); ++i) {
        const auto& ex = ds.examples[i];
        if (ex.a == ex.b) throw ValidationError("example " + std::to_string(i) + " pairs a protein with itself");
        if (ex.label != 0 && ex.label != 1) throw ValidationError("example " + std::to_string(i) + " has label outside {0,1}");
        if (!seen.insert(unordered_key(ex)).second) {
            throw ValidationError("duplicate pair " + ex.a.str() + "/" + ex.b.str());
        }
    }
}

SyntheticDataset generate_synthetic(std::size_t n_proteins, std::size_t n_pairs, std::size_t latent_dim,
                                    std::uint64_t seed) {
    if (n_proteins < 2) throw ValidationError("need at least 2 proteins");
    if (n_proteins > 1'000'000'000ULL) throw ValidationError("too many proteins for 20-character identifiers");
    if (latent_dim < 1) throw ValidationError("latent_dim must be positive");
    if (n_pairs < 2 || n_pairs % 2 != 0) throw ValidationError("n_pairs must be a positive even number");
    const std::size_t max_pairs = n_proteins * (n_proteins - 1) / 2;
    if (n_pairs > max_pairs) {
        throw ValidationError("n_pairs " + std::to_string(n_pairs) + " exceeds the " + std::to_string(max_pairs) +
                              " distinct pairs available");
    }

    RandomStream latent_stream(derive_seed(seed, 0));
    RandomStream pair_stream(derive_seed(seed, 1));

    SyntheticDataset out;
    out.latents = Matrix(n_proteins, latent_dim);
    for (double& x : out.latents.values()) x = kLatentMean + latent_stream.normal();
    const std::size_t letters = std::min(latent_dim, kMaxCodeLetters);
    for (std::size_t p = 0; p < n_proteins; ++p) {
        std::string id;
        for (std::size_t j = 0; j < letters; ++j) {
            const double u = normal_cdf(out.latents(p, j) - kLatentMean);
            id += static_cast<char>('A' + std::min<int>(kLevels - 1, static_cast<int>(u * kLevels)));
        }
        id += '_';
        id += std::to_string(p);
        out.proteins.emplace_back(std::move(id));
    }

    // Distinct unordered candidate pairs.
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    if (2 * n_pairs > max_pairs) {
        for (std::size_t i = 0; i < n_proteins; ++i)
            for (std::size_t j = i + 1; j < n_proteins; ++j) pairs.emplace_back(i, j);
        shuffle(pairs, pair_stream);
        pairs.resize(n_pairs);
    } else {
        std::unordered_set<std::uint64_t> seen;
        while (pairs.size() < n_pairs) {
            std::size_t i = pair_stream.below(n_proteins), j = pair_stream.below(n_proteins);
            if (i == j) continue;
            if (i > j) std::swap(i, j);
            if (seen.insert(static_cast<std::uint64_t>(i) * n_proteins + j).second) pairs.emplace_back(i, j);
        }
    }

    std::vector<double> dots(n_pairs);
    for (std::size_t k = 0; k < n_pairs; ++k) {
        double s = 0.0;
        for (std::size_t j = 0; j < latent_dim; ++j) s += out.latents(pairs[k].first, j) * out.latents(pairs[k].second, j);
        dots[k] = s;
    }
    std::vector<double> sorted = dots;
    std::sort(sorted.begin(), sorted.end());
    const double lo = sorted[n_pairs / 2 - 1], hi = sorted[n_pairs / 2];
    if (!(lo < hi)) throw ComputationError("tied latent similarities at the median; choose another seed");
    out.threshold = 0.5 * (lo + hi);

    out.dataset.name = "synthetic";
    out.dataset.provenance = "synthetic n_proteins=" + std::to_string(n_proteins) + " n_pairs=" +
                             std::to_string(n_pairs) + " latent_dim=" + std::to_string(latent_dim) +
                             " seed=" + std::to_string(seed);
    for (std::size_t k = 0; k < n_pairs; ++k) {
        auto [i, j] = pairs[k];
        if (pair_stream.below(2) == 1) std::swap(i, j);
        out.dataset.examples.push_back({out.proteins[i], out.proteins[j], dots[k] > out.threshold ? 1 : 0});
    }
    return out;
}

Dataset parse_tsv(std::string_view text, std::string name) {
    Dataset ds;
    ds.name = name;
    ds.provenance = std::move(name);
    std::set<std::pair<std::string, std::string>> seen;
    std::size_t line_no = 0;
    for (std::string_view line : split(text, '\n')) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (trim(line).empty()) continue;
        if (line_no == 1 && line.starts_with("protein_a")) continue;
        const auto fields = split(line, '\t');
        if (fields.size() != 3) {
            throw ParseError("expected 3 tab-separated fields, got " + std::to_string(fields.size()), line_no);
        }
        const std::string_view label = trim(fields[2]);
        if (label != "0" && label != "1") {
            throw ParseError("label '" + std::string(label) + "' is not in {0,1}", line_no);
        }
        PairExample ex{ProteinId("A"), ProteinId("A"), label == "1" ? 1 : 0};
        try {
            ex.a = ProteinId(std::string(trim(fields[0])));
            ex.b = ProteinId(std::string(trim(fields[1])));
        } catch (const ValidationError& e) {
            throw ParseError(e.what(), line_no);
        }
        if (ex.a == ex.b) throw ParseError("self-pair " + ex.a.str(), line_no);
        if (!seen.insert(unordered_key(ex)).second) {
            throw ParseError("duplicate pair " + ex.a.str() + "/" + ex.b.str(), line_no);
        }
        ds.examples.push_back(std::move(ex));
    }
    return ds;
}

Dataset load_tsv(const std::string& path) {
    try {
        return parse_tsv(read_file(path), path);
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what(), 0);
    }
}

std::string to_tsv(const Dataset& ds) {
    std::string out = "protein_a\tprotein_b\tlabel\n";
    for (const auto& ex : ds.examples) out += ex.a.str() + '\t' + ex.b.str() + '\t' + (ex.label ? "1" : "0") + '\n';
    return out;
}

void save_tsv(const Dataset& ds, const std::string& path) { write_file(path, to_tsv(ds)); }

std::pair<Dataset, Dataset> split(const Dataset& ds, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ValidationError("train_fraction must lie in (0, 1)");
    if (ds.size() < 2) throw ValidationError("cannot split fewer than 2 examples");
    const auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(ds.size()) * train_fraction));
    if (n_train == 0 || n_train == ds.size()) {
        throw ValidationError("split leaves an empty partition (" + std::to_string(ds.size()) + " examples)");
    }
    std::vector<std::size_t> order(ds.size());
    std::iota(order.begin(), order.end(), 0);
    RandomStream stream(seed);
    shuffle(order, stream);
    Dataset train{ds.name + "/train", ds.provenance, {}}, test{ds.name + "/test", ds.provenance, {}};
    for (std::size_t i = 0; i < order.size(); ++i) {
        (i < n_train ? train : test).examples.push_back(ds.examples[order[i]]);
    }
    return {std::move(train), std::move(test)};
}

Vocab Vocab::standard() {
    std::string text = "[PAD]\n[UNK]\n[CLS]\n[SEP]\n";
    for (char c = 'A'; c <= 'Z'; ++c) text += std::string(1, c) + "\n";
    for (char c = '0'; c <= '9'; ++c) text += std::string(1, c) + "\n";
    text += "_\n";
    return parse(text);
}

Vocab Vocab::parse(std::string_view text) {
    Vocab v;
    std::fill(std::begin(v.char_ids_), std::end(v.char_ids_), static_cast<TokenId>(-1));
    bool has_pad = false, has_unk = false, has_cls = false, has_sep = false;
    std::size_t line_no = 0;
    for (std::string_view line : split(text, '\n')) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        const auto id = static_cast<TokenId>(v.tokens_.size());
        if (line == "[PAD]") { v.pad_ = id; has_pad = true; }
        else if (line == "[UNK]") { v.unk_ = id; has_unk = true; }
        else if (line == "[CLS]") { v.cls_ = id; has_cls = true; }
        else if (line == "[SEP]") { v.sep_ = id; has_sep = true; }
        else if (line.size() == 1) {
            const auto c = static_cast<unsigned char>(line[0]);
            if (v.char_ids_[c] != static_cast<TokenId>(-1)) throw ParseError("duplicate vocab token", line_no);
            v.char_ids_[c] = id;
        } else {
            throw ParseError("vocab token '" + std::string(line) + "' is neither a character nor a special token", line_no);
        }
        v.tokens_.emplace_back(line);
    }
    if (!(has_pad && has_unk && has_cls && has_sep)) throw ParseError("vocab lacks one of [PAD] [UNK] [CLS] [SEP]", 0);
    return v;
}

Vocab Vocab::load(const std::string& path) { return parse(read_file(path)); }

TokenId Vocab::id(char c) const {
    const TokenId t = char_ids_[static_cast<unsigned char>(c)];
    if (t == static_cast<TokenId>(-1)) throw ValidationError("character '" + std::string(1, c) + "' is not in the vocabulary");
    return t;
}

std::string Vocab::to_text() const {
    std::string out;
    for (const auto& t : tokens_) out += t + '\n';
    return out;
}

std::vector<TokenId> encode_pair(const PairExample& ex, const Vocab& vocab, std::size_t max_len) {
    if (max_len < 3) throw ValidationError("max_len must leave room for [CLS] and two [SEP]");
    const std::string& a = ex.a.str();
    const std::string& b = ex.b.str();
    std::size_t la = a.size(), lb = b.size();
    while (la + lb > max_len - 3) {
        if (la >= lb) --la;
        else --lb;
    }
    std::vector<TokenId> out;
    out.reserve(max_len);
    out.push_back(vocab.cls());
    for (std::size_t i = 0; i < la; ++i) out.push_back(vocab.id(a[i]));
    out.push_back(vocab.sep());
    for (std::size_t i = 0; i < lb; ++i) out.push_back(vocab.id(b[i]));
    out.push_back(vocab.sep());
    out.resize(max_len, vocab.pad());
    return out;
}

std::vector<LabeledSequence> encode_dataset(const Dataset& ds, const Vocab& vocab, std::size_t max_len) {
    std::vector<LabeledSequence> out;
    out.reserve(ds.size());
    for (const auto& ex : ds.examples) out.push_back({encode_pair(ex, vocab, max_len), ex.label});
    return out;
}

}  // namespace bayeslora
