#include "refnet/layers.hpp"

#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>

namespace refnet::nn {

namespace {

void write_u64(std::ostream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
std::uint64_t read_u64(std::istream& in) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!in) throw std::runtime_error("checkpoint: truncated stream");
    return v;
}
void write_scalars(std::ostream& out, const std::vector<Scalar>& v) {
    write_u64(out, v.size());
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(Scalar)));
}
std::vector<Scalar> read_scalars(std::istream& in) {
    const std::uint64_t n = read_u64(in);
    std::vector<Scalar> v(n);
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(Scalar)));
    if (!in) throw std::runtime_error("checkpoint: truncated scalar block");
    return v;
}

} // namespace

std::uint64_t fnv1a64(const void* data, std::size_t bytes, std::uint64_t seed) {
    // word-at-a-time FNV variant: one multiply per 8 bytes
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    std::size_t i = 0;
    for (; i + 8 <= bytes; i += 8) {
        std::uint64_t w;
        std::memcpy(&w, p + i, 8);
        h ^= w;
        h *= 0x100000001b3ull;
    }
    for (; i < bytes; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

Tensor ParamStore::create(const std::string& name, const Shape& shape, std::vector<Scalar> init) {
    Tensor t = Tensor::leaf(shape, std::move(init), true);
    params_.push_back(t);
    names_.push_back(name);
    return t;
}

void ParamStore::set_requires_grad(bool v) {
    for (auto& p : params_) p.set_requires_grad(v);
}

std::size_t ParamStore::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.vec().size();
    return n;
}

std::uint64_t ParamStore::checksum() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& p : params_)
        h = fnv1a64(p.data(), p.vec().size() * sizeof(Scalar), h);
    return h;
}

void ParamStore::save(std::ostream& out) const {
    write_u64(out, params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i) {
        write_u64(out, names_[i].size());
        out.write(names_[i].data(), static_cast<std::streamsize>(names_[i].size()));
        write_u64(out, params_[i].shape().size());
        for (int d : params_[i].shape()) write_u64(out, static_cast<std::uint64_t>(d));
        write_scalars(out, params_[i].vec());
    }
}

void ParamStore::load(std::istream& in) {
    const std::uint64_t n = read_u64(in);
    if (n != params_.size()) throw std::runtime_error("ParamStore::load: parameter count mismatch");
    for (std::size_t i = 0; i < n; ++i) {
        std::string name(read_u64(in), '\0');
        in.read(name.data(), static_cast<std::streamsize>(name.size()));
        if (name != names_[i])
            throw std::runtime_error("ParamStore::load: parameter name mismatch: " + name +
                                     " vs " + names_[i]);
        Shape shape(read_u64(in));
        for (auto& d : shape) d = static_cast<int>(read_u64(in));
        if (shape != params_[i].shape())
            throw std::runtime_error("ParamStore::load: shape mismatch for " + name);
        std::vector<Scalar> data = read_scalars(in);
        std::copy(data.begin(), data.end(), params_[i].data());
    }
}

void Adam::step(ParamStore& store, const GradMap& grads) {
    for (auto& p : store.tensors()) {
        if (!grads.contains(p)) continue;
        const Tensor g = grads.at(p);
        State& st = state_[p.node()];
        if (st.m.empty()) {
            st.m.assign(p.vec().size(), 0.0);
            st.v.assign(p.vec().size(), 0.0);
        }
        ++st.t;
        const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(st.t));
        const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(st.t));
        Scalar* pd = p.data();
        const Scalar* gd = g.data();
        for (std::size_t i = 0; i < st.m.size(); ++i) {
            st.m[i] = beta1_ * st.m[i] + (1.0 - beta1_) * gd[i];
            st.v[i] = beta2_ * st.v[i] + (1.0 - beta2_) * gd[i] * gd[i];
            const double mhat = st.m[i] / bc1;
            const double vhat = st.v[i] / bc2;
            pd[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

void Adam::save(std::ostream& out, const ParamStore& store) const {
    for (const auto& p : store.tensors()) {
        auto it = state_.find(p.node());
        const bool has = it != state_.end();
        write_u64(out, has ? 1 : 0);
        if (!has) continue;
        write_u64(out, static_cast<std::uint64_t>(it->second.t));
        write_scalars(out, it->second.m);
        write_scalars(out, it->second.v);
    }
}

void Adam::load(std::istream& in, const ParamStore& store) {
    state_.clear();
    for (const auto& p : store.tensors()) {
        if (read_u64(in) == 0) continue;
        State st;
        st.t = static_cast<std::int64_t>(read_u64(in));
        st.m = read_scalars(in);
        st.v = read_scalars(in);
        if (st.m.size() != p.vec().size() || st.v.size() != p.vec().size())
            throw std::runtime_error("Adam::load: state size mismatch");
        state_[p.node()] = std::move(st);
    }
}

std::vector<Scalar> kaiming_normal(Rng& rng, int fan_in, std::size_t count) {
    const double std = std::sqrt(2.0 / static_cast<double>(fan_in));
    std::vector<Scalar> v(count);
    for (auto& x : v) x = rng.normal(0.0, std);
    return v;
}

Conv2dLayer Conv2dLayer::make(ParamStore& store, const std::string& name, int in_ch, int out_ch,
                              int k, int stride, int pad, Rng& rng) {
    Conv2dLayer l;
    l.stride = stride;
    l.pad = pad;
    const std::size_t wcount = static_cast<std::size_t>(out_ch) * in_ch * k * k;
    l.w = store.create(name + ".w", {out_ch, in_ch, k, k}, kaiming_normal(rng, in_ch * k * k, wcount));
    l.b = store.create(name + ".b", {out_ch}, std::vector<Scalar>(out_ch, 0.0));
    return l;
}

GroupNormLayer GroupNormLayer::make(ParamStore& store, const std::string& name, int channels,
                                    int groups) {
    GroupNormLayer l;
    l.groups = std::min(groups, channels);
    while (channels % l.groups != 0) --l.groups; // always terminates at 1
    l.gamma = store.create(name + ".gamma", {channels}, std::vector<Scalar>(channels, 1.0));
    l.beta = store.create(name + ".beta", {channels}, std::vector<Scalar>(channels, 0.0));
    return l;
}

Tensor GroupNormLayer::operator()(const Tensor& x) const {
    return group_norm_op(x, gamma, beta, groups, eps);
}

LinearLayer LinearLayer::make(ParamStore& store, const std::string& name, int in_dim, int out_dim,
                              Rng& rng) {
    LinearLayer l;
    l.w = store.create(name + ".w", {out_dim, in_dim},
                       kaiming_normal(rng, in_dim, static_cast<std::size_t>(out_dim) * in_dim));
    l.b = store.create(name + ".b", {out_dim}, std::vector<Scalar>(out_dim, 0.0));
    return l;
}

Tensor LinearLayer::operator()(const Tensor& x) const {
    return add_channel_bias(matmul(x, transpose2d(w)), b);
}

} // namespace refnet::nn
