// Copyright (c) 2026, The bayeslora authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bayeslora/model.hpp"
#include "bayeslora/numerics.hpp"

namespace bayeslora {

/// Protein identifier: 1–20 characters from [A-Z0-9_].
class ProteinId {
public:
    explicit ProteinId(std::string value);
    const std::string& str() const noexcept { return value_; }
    friend auto operator<=>(const ProteinId&, const ProteinId&) = default;

private:
    std::string value_;
};

struct PairExample {
    ProteinId a;
    ProteinId b;
    int label = 0;
};

struct Dataset {
    std::string name;
    std::string provenance;
    std::vector<PairExample> examples;

    std::size_t size() const noexcept { return examples.size(); }
    std::size_t positives() const noexcept;
};

/// Throws ValidationError on self-pairs, duplicate unordered pairs or labels outside {0,1}.
void validate_dataset(const Dataset& ds);

struct SyntheticDataset {
    Dataset dataset;
    std::vector<ProteinId> proteins;
    Matrix latents;          ///< one row per protein
    double threshold = 0.0;  ///< label = latent dot product > threshold
};

/// Surrogate interaction set. Identifiers spell out a coarse quantization of each
/// protein's leading latent coordinates, followed by a unique index.
SyntheticDataset generate_synthetic(std::size_t n_proteins, std::size_t n_pairs, std::size_t latent_dim,
                                    std::uint64_t seed);

/// Lines `protein_a<TAB>protein_b<TAB>label`; an optional header starting with `protein_a` is skipped.
Dataset parse_tsv(std::string_view text, std::string name);
Dataset load_tsv(const std::string& path);
std::string to_tsv(const Dataset& ds);
void save_tsv(const Dataset& ds, const std::string& path);

/// Seeded shuffle then prefix split; |train| = round(N·fraction).
std::pair<Dataset, Dataset> split(const Dataset& ds, double train_fraction, std::uint64_t seed);

/// Character-level vocabulary; token id = zero-based line number in the vocab file.
class Vocab {
public:
    static Vocab standard();
    static Vocab parse(std::string_view text);
    static Vocab load(const std::string& path);

    std::size_t size() const noexcept { return tokens_.size(); }
    const std::string& token(TokenId id) const { return tokens_.at(id); }
    TokenId pad() const noexcept { return pad_; }
    TokenId unk() const noexcept { return unk_; }
    TokenId cls() const noexcept { return cls_; }
    TokenId sep() const noexcept { return sep_; }
    /// Throws ValidationError naming the character when it has no token.
    TokenId id(char c) const;
    std::string to_text() const;

private:
    std::vector<std::string> tokens_;
    TokenId char_ids_[256];
    TokenId pad_ = 0, unk_ = 0, cls_ = 0, sep_ = 0;
};

/// [CLS] a [SEP] b [SEP] then [PAD] up to `max_len`. Overlong identifiers lose their tails,
/// longer one first; structural tokens are never dropped.
std::vector<TokenId> encode_pair(const PairExample& ex, const Vocab& vocab, std::size_t max_len = 50);
std::vector<LabeledSequence> encode_dataset(const Dataset& ds, const Vocab& vocab, std::size_t max_len = 50);

}  // namespace bayeslora
