// Copyright (c) 2026, The bayeslora authors
// SPDX-License-Identifier: Apache-2.0
//

#include "bayeslora/checkpoint.hpp"

#include "bayeslora/error.hpp"
#include "bayeslora/format.hpp"

namespace bayeslora {

namespace {

constexpr std::string_view kMagic = "bayeslora-checkpoint 1";

void put_matrix(std::string& out, const char* tag, const Matrix& m) {
    out += std::string(tag) + " " + std::to_string(m.rows()) + " " + std::to_string(m.cols()) + "\n";
    std::string line;
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (i) line += ' ';
        line += format_double(m.data()[i]);
    }
    out += line + "\n";
}

void put_header(std::string& out, const char* kind, const FrozenBackbone& bb) {
    const BackboneConfig& c = bb.config();
    out += std::string(kMagic) + "\n";
    out += std::string("kind ") + kind + "\n";
    out += "backbone " + std::to_string(c.vocab_size) + " " + std::to_string(c.embed_dim) + " " +
           std::to_string(c.num_heads) + " " + std::to_string(c.num_layers) + " " + std::to_string(c.max_seq_len) +
           " " + std::to_string(c.num_classes) + " " + std::to_string(c.pad_id) + "\n";
    out += "backbone_seed " + std::to_string(bb.seed()) + "\n";
    out += "backbone_fingerprint " + hex64(bb.fingerprint()) + "\n";
}

void put_adapters(std::string& out, const LoraModel& model) {
    out += "adapters " + std::to_string(model.adapters().size()) + "\n";
    for (const auto& a : model.adapters()) {
        out += "adapter " + std::to_string(a.layer_id) + " " + std::to_string(a.rank) + " " + format_double(a.alpha) +
               " " + format_double(a.dropout) + "\n";
        put_matrix(out, "B", a.b);
        put_matrix(out, "A", a.a);
    }
}

// Line-oriented reader with 1-based line numbers for error messages.
class Reader {
public:
    explicit Reader(std::string_view text) : lines_(split(text, '\n')) {}

    std::size_t line_no() const noexcept { return pos_; }

    std::vector<std::string_view> fields(std::string_view tag, std::size_t count) {
        const auto f = next();
        if (f.empty() || f[0] != tag) fail("expected '" + std::string(tag) + "'");
        if (f.size() != count + 1) {
            fail("'" + std::string(tag) + "' needs " + std::to_string(count) + " values, got " +
                 std::to_string(f.size() - 1));
        }
        return {f.begin() + 1, f.end()};
    }

    std::vector<std::string_view> next() {
        while (pos_ < lines_.size()) {
            const std::string_view l = trim(lines_[pos_++]);
            if (l.empty()) continue;
            std::vector<std::string_view> out;
            for (std::string_view f : split(l, ' '))
                if (!f.empty()) out.push_back(f);
            return out;
        }
        ++pos_;
        fail("unexpected end of checkpoint");
    }

    std::size_t size_value(std::string_view f) { return guarded([&] { return static_cast<std::size_t>(parse_u64(f)); }); }
    std::uint64_t u64_value(std::string_view f) { return guarded([&] { return parse_u64(f); }); }
    double double_value(std::string_view f) { return guarded([&] { return parse_double(f); }); }

    Matrix matrix(std::string_view tag) {
        const auto dims = fields(tag, 2);
        const std::size_t rows = size_value(dims[0]), cols = size_value(dims[1]);
        const auto vals = rows * cols != 0 ? next() : std::vector<std::string_view>{};
        if (vals.size() != rows * cols) fail("matrix '" + std::string(tag) + "' has the wrong number of values");
        std::vector<double> v;
        v.reserve(vals.size());
        for (auto f : vals) v.push_back(double_value(f));
        return guarded([&] { return Matrix(rows, cols, std::move(v)); });
    }

    [[noreturn]] void fail(const std::string& msg) const { throw ParseError("checkpoint: " + msg, pos_); }

private:
    template <class F>
    auto guarded(F&& f) -> decltype(f()) {
        try {
            return f();
        } catch (const ParseError&) {
            throw;
        } catch (const ValidationError& e) {
            fail(e.what());
        }
    }

    std::vector<std::string_view> lines_;
    std::size_t pos_ = 0;
};

std::shared_ptr<const FrozenBackbone> read_header(Reader& r, std::string_view kind) {
    const auto magic = r.next();
    if (magic.size() != 2 || magic[0] != "bayeslora-checkpoint") r.fail("not a bayeslora checkpoint");
    if (magic[1] != "1") r.fail("unsupported checkpoint version " + std::string(magic[1]));
    const auto k = r.fields("kind", 1);
    if (k[0] != kind) r.fail("expected a " + std::string(kind) + " checkpoint, found " + std::string(k[0]));
    const auto b = r.fields("backbone", 7);
    BackboneConfig c;
    c.vocab_size = r.size_value(b[0]);
    c.embed_dim = r.size_value(b[1]);
    c.num_heads = r.size_value(b[2]);
    c.num_layers = r.size_value(b[3]);
    c.max_seq_len = r.size_value(b[4]);
    c.num_classes = r.size_value(b[5]);
    c.pad_id = static_cast<TokenId>(r.size_value(b[6]));
    const std::uint64_t seed = r.u64_value(r.fields("backbone_seed", 1)[0]);
    const std::string fp(r.fields("backbone_fingerprint", 1)[0]);
    std::shared_ptr<const FrozenBackbone> bb;
    try {
        bb = init_backbone(c, seed);
    } catch (const ValidationError& e) {
        r.fail(e.what());
    }
    if (hex64(bb->fingerprint()) != fp) r.fail("backbone fingerprint mismatch");
    return bb;
}

LoraModel read_adapters(Reader& r, std::shared_ptr<const FrozenBackbone> bb) {
    const std::size_t n = r.size_value(r.fields("adapters", 1)[0]);
    std::vector<LoraAdapter> adapters;
    for (std::size_t i = 0; i < n; ++i) {
        const auto f = r.fields("adapter", 4);
        LoraAdapter a;
        a.layer_id = r.size_value(f[0]);
        a.rank = r.size_value(f[1]);
        a.alpha = r.double_value(f[2]);
        a.dropout = r.double_value(f[3]);
        a.b = r.matrix("B");
        a.a = r.matrix("A");
        adapters.push_back(std::move(a));
    }
    try {
        return LoraModel(std::move(bb), std::move(adapters));
    } catch (const ValidationError& e) {
        r.fail(e.what());
    }
}

void put_side(std::string& out, const char* tag, const FactorSide& s) {
    out += std::string(tag) + (s.compressed() ? " low_rank\n" : " dense\n");
    put_matrix(out, "M", s.stored());
}

FactorSide read_side(Reader& r, std::string_view tag) {
    const auto f = r.fields(tag, 1);
    const bool low = f[0] == "low_rank";
    if (!low && f[0] != "dense") r.fail("factor side must be 'dense' or 'low_rank'");
    Matrix m = r.matrix("M");
    if (low) return FactorSide::low_rank(std::move(m));
    if (m.rows() != m.cols()) r.fail("dense factor side must be square");
    return FactorSide::dense(std::move(m));
}

}  // namespace

std::string model_to_text(const LoraModel& model) {
    std::string out;
    put_header(out, "model", model.backbone());
    put_adapters(out, model);
    return out;
}

LoraModel model_from_text(std::string_view text) {
    Reader r(text);
    auto bb = read_header(r, "model");
    return read_adapters(r, std::move(bb));
}

std::string ensemble_to_text(const LoraEnsemble& ensemble) {
    std::string out;
    put_header(out, "ensemble", ensemble.backbone());
    out += "members " + std::to_string(ensemble.size()) + "\n";
    for (std::size_t m = 0; m < ensemble.size(); ++m) {
        out += "member " + std::to_string(m) + " " + std::to_string(ensemble.member(m).seed) + "\n";
        put_adapters(out, ensemble.member(m).model);
    }
    return out;
}

LoraEnsemble ensemble_from_text(std::string_view text) {
    Reader r(text);
    auto bb = read_header(r, "ensemble");
    const std::size_t n = r.size_value(r.fields("members", 1)[0]);
    std::vector<EnsembleMember> members;
    for (std::size_t m = 0; m < n; ++m) {
        const auto f = r.fields("member", 2);
        if (r.size_value(f[0]) != m) r.fail("members out of order");
        const std::uint64_t seed = r.u64_value(f[1]);
        members.push_back({read_adapters(r, bb), seed, {}});
    }
    try {
        return LoraEnsemble(std::move(members));
    } catch (const ValidationError& e) {
        r.fail(e.what());
    }
}

std::string posterior_to_text(const LoraModel& map_model, const LaplacePosterior& posterior) {
    if (map_model.flatten_params() != posterior.map_estimate()) {
        throw ValidationError("posterior MAP estimate does not match the model parameters");
    }
    std::string out;
    put_header(out, "posterior", map_model.backbone());
    put_adapters(out, map_model);
    out += "prior_precision " + format_double(posterior.prior_precision()) + "\n";
    out += "factors " + std::to_string(posterior.factors().size()) + "\n";
    for (const auto& f : posterior.factors()) {
        out += "factor " + std::to_string(f.block) + " " + std::to_string(f.layout.offset) + " " +
               std::to_string(f.layout.out_dim) + " " + std::to_string(f.layout.in_dim) + " " +
               std::to_string(f.sample_count) + "\n";
        put_side(out, "act", f.act);
        put_side(out, "grad", f.grad);
    }
    return out;
}

PosteriorCheckpoint posterior_from_text(std::string_view text) {
    Reader r(text);
    auto bb = read_header(r, "posterior");
    LoraModel model = read_adapters(r, bb);
    const double lambda = r.double_value(r.fields("prior_precision", 1)[0]);
    const std::size_t n = r.size_value(r.fields("factors", 1)[0]);
    std::vector<KfacFactor> factors;
    for (std::size_t i = 0; i < n; ++i) {
        const auto f = r.fields("factor", 5);
        KfacFactor k;
        k.block = r.size_value(f[0]);
        k.layout.offset = r.size_value(f[1]);
        k.layout.out_dim = r.size_value(f[2]);
        k.layout.in_dim = r.size_value(f[3]);
        k.sample_count = r.size_value(f[4]);
        k.act = read_side(r, "act");
        k.grad = read_side(r, "grad");
        factors.push_back(std::move(k));
    }
    try {
        LaplacePosterior post(model.flatten_params(), std::move(factors), lambda);
        return {std::move(model), std::move(post)};
    } catch (const ValidationError& e) {
        r.fail(e.what());
    }
}

void save_model(const LoraModel& model, const std::string& path) { write_file(path, model_to_text(model)); }
LoraModel load_model(const std::string& path) { return model_from_text(read_file(path)); }
void save_ensemble(const LoraEnsemble& ensemble, const std::string& path) {
    write_file(path, ensemble_to_text(ensemble));
}
LoraEnsemble load_ensemble(const std::string& path) { return ensemble_from_text(read_file(path)); }
void save_posterior(const LoraModel& map_model, const LaplacePosterior& posterior, const std::string& path) {
    write_file(path, posterior_to_text(map_model, posterior));
}
PosteriorCheckpoint load_posterior(const std::string& path) { return posterior_from_text(read_file(path)); }

std::string checkpoint_kind(std::string_view text) {
    Reader r(text);
    const auto magic = r.next();
    if (magic.size() != 2 || magic[0] != "bayeslora-checkpoint") r.fail("not a bayeslora checkpoint");
    const std::string kind(r.fields("kind", 1)[0]);
    if (kind != "model" && kind != "ensemble" && kind != "posterior") r.fail("unknown checkpoint kind " + kind);
    return kind;
}

}  // namespace bayeslora
