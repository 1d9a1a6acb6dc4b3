#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "lsa/autodiff.hpp"
#include "lsa/config.hpp"
#include "lsa/mat.hpp"

// Every learnable tensor of the model, flat and named. Names are stable and
// define the checkpoint format; save/load round-trips bitwise.

namespace lsa {

struct ModelDims {
    int n_users = 0;
    int n_items = 0;
    int n_aspects = 0;
    int d = 64;
    int L = 2;
    int H = 2;
    int n_positions = 11;  // anchor + N short-term slots
    int k_fm = 8;
    static constexpr int kTimeBuckets = 16;  // log2 day buckets: 0, 1, 2-3, 4-7, ...

    int d_head() const { return d / H; }

    static ModelDims from_config(const TrainConfig& cfg, int n_users, int n_items,
                                 int n_aspects) {
        if (cfg.d % cfg.H != 0) throw std::invalid_argument("d must be divisible by H");
        ModelDims dims;
        dims.n_users = n_users;
        dims.n_items = n_items;
        dims.n_aspects = n_aspects;
        dims.d = cfg.d;
        dims.L = cfg.L;
        dims.H = cfg.H;
        dims.n_positions = cfg.N + 1;
        dims.k_fm = cfg.k_fm;
        return dims;
    }
};

struct EncoderIdx {
    struct Layer {
        std::vector<int> att_w;  // per head, (dh x 2dh): [left | right] blocks
        std::vector<int> att_a;  // per head, (1 x dh)
        int ffn_w1, ffn_b1, ffn_w2, ffn_b2;
        int ln1_g, ln1_b, ln2_g, ln2_b;
    };
    std::vector<Layer> layers;
    int pos = -1;   // short-term recency-rank table
    int time = -1;  // short-term elapsed-day bucket table
};

struct GateIdx {
    int w_l, w_s, w_g, b_g, w3, b;
};

struct AggIdx {
    int w_f, b_f, w_q, w_k, w_v;
};

struct FmIdx {
    int b0, b_user, b_item, w, v;
};

class ModelParams {
public:
    ModelParams() = default;

    explicit ModelParams(const ModelDims& dims) : dims_(dims) {
        int d = dims.d, dh = dims.d_head();
        emb_user = add("emb.user", dims.n_users, d);
        emb_item = add("emb.item", dims.n_items, d);
        emb_aspect = add("emb.aspect", dims.n_aspects, d);
        pref_user = add("pref.user", dims.n_users, d);
        pref_item = add("pref.item", dims.n_items, d);
        select_w1 = add("select.w1", d, d);

        auto add_encoder = [&](const char* tag, bool short_term) {
            EncoderIdx enc;
            for (int l = 0; l < dims.L; ++l) {
                EncoderIdx::Layer layer;
                std::string base = std::string("enc.") + tag + ".l" + std::to_string(l);
                for (int h = 0; h < dims.H; ++h) {
                    std::string hb = base + ".h" + std::to_string(h);
                    layer.att_w.push_back(add(hb + ".att_w", dh, 2 * dh));
                    layer.att_a.push_back(add(hb + ".att_a", 1, dh));
                }
                layer.ffn_w1 = add(base + ".ffn.w1", 4 * d, d);
                layer.ffn_b1 = add(base + ".ffn.b1", 1, 4 * d);
                layer.ffn_w2 = add(base + ".ffn.w2", d, 4 * d);
                layer.ffn_b2 = add(base + ".ffn.b2", 1, d);
                layer.ln1_g = add(base + ".ln1.g", 1, d);
                layer.ln1_b = add(base + ".ln1.b", 1, d);
                layer.ln2_g = add(base + ".ln2.g", 1, d);
                layer.ln2_b = add(base + ".ln2.b", 1, d);
                enc.layers.push_back(std::move(layer));
            }
            if (short_term) {
                enc.pos = add(std::string("enc.") + tag + ".pos", dims.n_positions, d);
                enc.time = add(std::string("enc.") + tag + ".time", ModelDims::kTimeBuckets, d);
            }
            return enc;
        };
        enc_long = add_encoder("long", false);
        enc_short = add_encoder("short", true);

        auto add_gate = [&](const char* tag) {
            std::string base = std::string("gate.") + tag;
            GateIdx g;
            g.w_l = add(base + ".w_l", d, d);
            g.w_s = add(base + ".w_s", d, d);
            g.w_g = add(base + ".w_g", d, 2 * d);
            g.b_g = add(base + ".b_g", 1, d);
            g.w3 = add(base + ".w3", d, d);
            g.b = add(base + ".b", 1, d);
            return g;
        };
        gate_user = add_gate("user");
        gate_item = add_gate("item");

        agg.w_f = add("agg.w_f", d, 4 * d);
        agg.b_f = add("agg.b_f", 1, d);
        agg.w_q = add("agg.w_q", d, d);
        agg.w_k = add("agg.w_k", d, d);
        agg.w_v = add("agg.w_v", d, d);

        int dprime = 5 * d;
        fm.b0 = add("fm.b0", 1, 1);
        fm.b_user = add("fm.b_user", dims.n_users, 1);
        fm.b_item = add("fm.b_item", dims.n_items, 1);
        fm.w = add("fm.w", 1, dprime);
        fm.v = add("fm.v", dprime, dims.k_fm);
    }

    // Embeddings uniform in [-1/sqrt(d), 1/sqrt(d)]; weight matrices uniform
    // scaled by fan-in; biases and offsets zero; layer-norm gains one. Every
    // tensor draws from its own named stream, so init is independent of
    // registration order.
    void init(uint64_t seed) {
        for (size_t i = 0; i < tensors_.size(); ++i) {
            Mat& t = tensors_[i];
            const std::string& name = names_[i];
            Rng rng = named_stream(seed, "init." + name);
            auto uniform_fill = [&](double a) {
                for (size_t k = 0; k < t.size(); ++k) t[k] = rng.uniform(-a, a);
            };
            auto contains = [&](const char* s) { return name.find(s) != std::string::npos; };

            if (name.rfind("emb.", 0) == 0 || name.rfind("pref.", 0) == 0 ||
                contains(".pos") || contains(".time")) {
                uniform_fill(1.0 / std::sqrt(double(dims_.d)));
            } else if (contains(".ln")) {
                t.fill(name.back() == 'g' ? 1.0 : 0.0);
            } else if (name == "fm.w" || name == "fm.v") {
                uniform_fill(0.01);
            } else if (contains("att_a")) {
                uniform_fill(1.0 / std::sqrt(double(t.size())));
            } else if (name == "fm.b0" || contains(".b_") || name.ends_with(".b") ||
                       name.ends_with(".b1") || name.ends_with(".b2")) {
                t.zero();
            } else {
                uniform_fill(1.0 / std::sqrt(double(t.cols())));  // fan-in
            }
        }
    }

    const ModelDims& dims() const { return dims_; }
    int count() const { return int(tensors_.size()); }
    const std::string& name(int i) const { return names_[i]; }
    Mat& tensor(int i) { return tensors_[i]; }
    const Mat& tensor(int i) const { return tensors_[i]; }
    int index_of(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw std::out_of_range("no tensor named " + name);
        return it->second;
    }

    size_t total_scalars() const {
        size_t n = 0;
        for (const auto& t : tensors_) n += t.size();
        return n;
    }

    // First tensor containing a non-finite entry, or empty string.
    std::string first_nonfinite() const {
        for (size_t i = 0; i < tensors_.size(); ++i)
            if (!tensors_[i].all_finite()) return names_[i];
        return {};
    }

    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
        const char magic[8] = {'L', 'S', 'A', 'C', 'K', 'P', 'T', 1};
        out.write(magic, 8);
        uint32_t count = uint32_t(tensors_.size());
        out.write(reinterpret_cast<const char*>(&count), 4);
        for (size_t i = 0; i < tensors_.size(); ++i) {
            uint32_t len = uint32_t(names_[i].size());
            out.write(reinterpret_cast<const char*>(&len), 4);
            out.write(names_[i].data(), len);
            int32_t r = tensors_[i].rows(), c = tensors_[i].cols();
            out.write(reinterpret_cast<const char*>(&r), 4);
            out.write(reinterpret_cast<const char*>(&c), 4);
            out.write(reinterpret_cast<const char*>(tensors_[i].data()),
                      std::streamsize(tensors_[i].size() * sizeof(double)));
        }
        if (!out) throw std::runtime_error("short write to checkpoint: " + path);
    }

    // Loads into an already-constructed registry; names and shapes must match.
    void load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
        char magic[8];
        in.read(magic, 8);
        if (!in || std::memcmp(magic, "LSACKPT\1", 8) != 0)
            throw std::runtime_error("bad checkpoint magic: " + path);
        uint32_t count = 0;
        in.read(reinterpret_cast<char*>(&count), 4);
        if (count != tensors_.size())
            throw std::runtime_error("checkpoint tensor count mismatch: " + path);
        for (uint32_t i = 0; i < count; ++i) {
            uint32_t len = 0;
            in.read(reinterpret_cast<char*>(&len), 4);
            std::string name(len, '\0');
            in.read(name.data(), len);
            int32_t r = 0, c = 0;
            in.read(reinterpret_cast<char*>(&r), 4);
            in.read(reinterpret_cast<char*>(&c), 4);
            if (name != names_[i] || r != tensors_[i].rows() || c != tensors_[i].cols())
                throw std::runtime_error("checkpoint tensor mismatch at " + name);
            in.read(reinterpret_cast<char*>(tensors_[i].data()),
                    std::streamsize(tensors_[i].size() * sizeof(double)));
        }
        if (!in) throw std::runtime_error("truncated checkpoint: " + path);
    }

    int emb_user = -1, emb_item = -1, emb_aspect = -1, pref_user = -1, pref_item = -1;
    int select_w1 = -1;
    EncoderIdx enc_long, enc_short;
    GateIdx gate_user{}, gate_item{};
    AggIdx agg{};
    FmIdx fm{};

private:
    int add(const std::string& name, int rows, int cols) {
        int id = int(tensors_.size());
        names_.push_back(name);
        tensors_.emplace_back(rows, cols);
        index_.emplace(name, id);
        return id;
    }

    ModelDims dims_;
    std::vector<std::string> names_;
    std::vector<Mat> tensors_;
    std::unordered_map<std::string, int> index_;
};

// Gradient buffer aligned with a ModelParams registry.
struct Grads {
    explicit Grads(const ModelParams& p) {
        g.reserve(p.count());
        for (int i = 0; i < p.count(); ++i) g.emplace_back(p.tensor(i).rows(), p.tensor(i).cols());
    }
    void zero() {
        for (auto& m : g) m.zero();
    }
    void add(const Grads& o) {
        for (size_t i = 0; i < g.size(); ++i) g[i].add_inplace(o.g[i]);
    }
    std::vector<Mat> g;
};

// Binds parameters (and optionally gradients) for a forward pass, recording
// which tensors the pass touched.
struct ParamCtx {
    const ModelParams* params = nullptr;
    Grads* grads = nullptr;
    std::vector<char>* touched = nullptr;

    ad::ParamRef ref(int idx) const {
        if (touched) (*touched)[idx] = 1;
        return ad::ParamRef{&params->tensor(idx), grads ? &grads->g[idx] : nullptr};
    }
};

}  // namespace lsa
