#include "nodfuse/neural/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nodfuse/error.hpp"

namespace nodfuse::neural {

namespace {

template <class... Fs>
struct overloaded : Fs... {
    using Fs::operator()...;
};
template <class... Fs>
overloaded(Fs...) -> overloaded<Fs...>;

inline std::size_t at(const FeatureShape& s, int c, int x, int y, int z)
{
    return std::size_t(x) + std::size_t(s.x) * (std::size_t(y) + std::size_t(s.y) * (std::size_t(z) + std::size_t(s.z) * c));
}

// Range of output indices o with 0 <= o*stride + k - pad < n.
inline void valid_range(int n, int out, int stride, int k, int pad, int& lo, int& hi)
{
    // o >= ceil((pad - k) / stride)
    const int a = pad - k;
    lo = a <= 0 ? 0 : (a + stride - 1) / stride;
    // o <= floor((n - 1 + pad - k) / stride)
    const int b = n - 1 + pad - k;
    hi = b < 0 ? -1 : std::min(out - 1, b / stride);
}

template <class T>
void he_uniform(std::span<T> w, std::size_t fan_in, Rng& rng)
{
    const double limit = std::sqrt(6.0 / double(fan_in));
    for (auto& x : w)
        x = T(rng.uniform(-limit, limit));
}

template <class T>
class Conv3DLayer final : public Layer<T> {
public:
    Conv3DLayer(const Conv3D& spec, FeatureShape in, Rng& rng)
        : Layer<T>(in, {spec.out_channels, window_output(in.x, spec.kernel, spec.stride, spec.padding),
                        window_output(in.y, spec.kernel, spec.stride, spec.padding),
                        window_output(in.z, spec.kernel, spec.stride, spec.padding)}),
          k_(spec.kernel), s_(spec.stride)
    {
        for (int a = 0; a < 3; ++a)
            pad_[a] = window_pad_before(in[a], k_, s_, spec.padding);
        const std::size_t per_out = std::size_t(k_) * k_ * k_ * in.c;
        this->allocate(per_out * spec.out_channels + spec.out_channels);
        he_uniform(std::span<T>(this->params_).subspan(0, per_out * spec.out_channels), per_out, rng);
    }

    void forward(std::span<const T> in, std::span<T> out, bool, Rng*) override
    {
        const auto& is = this->in_shape_;
        const auto& os = this->out_shape_;
        const T* w = this->params_.data();
        const T* bias = w + std::size_t(k_) * k_ * k_ * is.c * os.c;
        for (int oc = 0; oc < os.c; ++oc)
            std::fill(out.begin() + std::ptrdiff_t(os.spatial() * oc), out.begin() + std::ptrdiff_t(os.spatial() * (oc + 1)),
                      bias[oc]);
        sweep([&](std::size_t o, std::size_t i, T weight, std::size_t, int n, int in_step) {
            T* op = out.data() + o;
            const T* ip = in.data() + i;
            for (int t = 0; t < n; ++t)
                op[t] += weight * ip[std::ptrdiff_t(t) * in_step];
        });
    }

    void backward(std::span<const T> in, std::span<const T>, std::span<const T> grad_out, std::span<T> grad_in) override
    {
        const auto& is = this->in_shape_;
        const auto& os = this->out_shape_;
        std::fill(grad_in.begin(), grad_in.end(), T(0));
        T* gw = this->grads_.data();
        T* gb = gw + std::size_t(k_) * k_ * k_ * is.c * os.c;
        for (int oc = 0; oc < os.c; ++oc) {
            T acc = 0;
            for (std::size_t p = 0; p < os.spatial(); ++p)
                acc += grad_out[os.spatial() * oc + p];
            gb[oc] += acc;
        }
        sweep([&](std::size_t o, std::size_t i, T weight, std::size_t widx, int n, int in_step) {
            const T* go = grad_out.data() + o;
            const T* ip = in.data() + i;
            T* gi = grad_in.data() + i;
            T acc = 0;
            for (int t = 0; t < n; ++t) {
                acc += go[t] * ip[std::ptrdiff_t(t) * in_step];
                gi[std::ptrdiff_t(t) * in_step] += weight * go[t];
            }
            gw[widx] += acc;
        });
    }

private:
    // Visits every (weight, output row segment) pair. fn receives the output
    // offset of the first element, the matching input offset, the weight, its
    // flat index, the segment length along x and the input stride along x.
    template <class Fn>
    void sweep(Fn&& fn) const
    {
        const auto& is = this->in_shape_;
        const auto& os = this->out_shape_;
        const T* w = this->params_.data();
        std::size_t widx = 0;
        for (int oc = 0; oc < os.c; ++oc)
            for (int ic = 0; ic < is.c; ++ic)
                for (int kz = 0; kz < k_; ++kz) {
                    int z0, z1;
                    valid_range(is.z, os.z, s_, kz, pad_[2], z0, z1);
                    for (int ky = 0; ky < k_; ++ky) {
                        int y0, y1;
                        valid_range(is.y, os.y, s_, ky, pad_[1], y0, y1);
                        for (int kx = 0; kx < k_; ++kx, ++widx) {
                            int x0, x1;
                            valid_range(is.x, os.x, s_, kx, pad_[0], x0, x1);
                            if (x1 < x0)
                                continue;
                            const T weight = w[widx];
                            for (int oz = z0; oz <= z1; ++oz) {
                                const int iz = oz * s_ + kz - pad_[2];
                                for (int oy = y0; oy <= y1; ++oy) {
                                    const int iy = oy * s_ + ky - pad_[1];
                                    const int ix = x0 * s_ + kx - pad_[0];
                                    fn(at(os, oc, x0, oy, oz), at(is, ic, ix, iy, iz), weight, widx, x1 - x0 + 1, s_);
                                }
                            }
                        }
                    }
                }
    }

    int k_;
    int s_;
    int pad_[3]{};
};

// Max pooling of one feature map set; shared by MaxPool3D and MultiCrop.
template <class T>
struct PoolOp {
    FeatureShape in, out;
    int window = 2, stride = 2;
    int pad[3]{};
    std::vector<std::uint32_t> argmax;

    PoolOp() = default;
    PoolOp(FeatureShape in_shape, int w, int s, Padding padding) : in(in_shape), window(w), stride(s)
    {
        out = {in.c, window_output(in.x, w, s, padding), window_output(in.y, w, s, padding),
               window_output(in.z, w, s, padding)};
        for (int a = 0; a < 3; ++a)
            pad[a] = window_pad_before(in[a], w, s, padding);
        argmax.resize(out.count());
    }

    void forward(const T* src, T* dst)
    {
        for (int c = 0; c < out.c; ++c)
            for (int oz = 0; oz < out.z; ++oz)
                for (int oy = 0; oy < out.y; ++oy)
                    for (int ox = 0; ox < out.x; ++ox) {
                        T best = -std::numeric_limits<T>::infinity();
                        std::size_t best_i = 0;
                        const int z0 = std::max(0, oz * stride - pad[2]), z1 = std::min(in.z, oz * stride - pad[2] + window);
                        const int y0 = std::max(0, oy * stride - pad[1]), y1 = std::min(in.y, oy * stride - pad[1] + window);
                        const int x0 = std::max(0, ox * stride - pad[0]), x1 = std::min(in.x, ox * stride - pad[0] + window);
                        bool first = true;
                        for (int z = z0; z < z1; ++z)
                            for (int y = y0; y < y1; ++y)
                                for (int x = x0; x < x1; ++x) {
                                    const std::size_t i = at(in, c, x, y, z);
                                    if (first || src[i] > best) {
                                        best = src[i];
                                        best_i = i;
                                        first = false;
                                    }
                                }
                        const std::size_t o = at(out, c, ox, oy, oz);
                        dst[o] = best;
                        argmax[o] = std::uint32_t(best_i);
                    }
    }

    // grad_in must be zeroed by the caller; routes accumulate.
    void backward(const T* grad_out, T* grad_in) const
    {
        for (std::size_t o = 0; o < argmax.size(); ++o)
            grad_in[argmax[o]] += grad_out[o];
    }
};

template <class T>
class MaxPoolLayer final : public Layer<T> {
public:
    MaxPoolLayer(const MaxPool3D& spec, FeatureShape in)
        : Layer<T>(in, PoolOp<T>(in, spec.window, spec.stride, spec.padding).out), op_(in, spec.window, spec.stride, spec.padding)
    {
    }

    void forward(std::span<const T> in, std::span<T> out, bool, Rng*) override { op_.forward(in.data(), out.data()); }

    void backward(std::span<const T>, std::span<const T>, std::span<const T> grad_out, std::span<T> grad_in) override
    {
        std::fill(grad_in.begin(), grad_in.end(), T(0));
        op_.backward(grad_out.data(), grad_in.data());
    }

private:
    PoolOp<T> op_;
};

template <class T>
class MultiCropLayer final : public Layer<T> {
public:
    MultiCropLayer(const MultiCrop& spec, FeatureShape in) : Layer<T>(in, in)
    {
        CropPlan plans[3] = {multicrop_plan(spec, in.x), multicrop_plan(spec, in.y), multicrop_plan(spec, in.z)};
        this->out_shape_ = {in.c * int(spec.pool_counts.size()), plans[0].target, plans[1].target, plans[2].target};
        for (std::size_t b = 0; b < spec.pool_counts.size(); ++b) {
            Branch br;
            br.crop = {in.c, plans[0].crop[b], plans[1].crop[b], plans[2].crop[b]};
            for (int a = 0; a < 3; ++a)
                br.start[a] = (in[a] - br.crop[a]) / 2;
            FeatureShape cur = br.crop;
            for (int k = 0; k < spec.pool_counts[b]; ++k) {
                br.pools.emplace_back(cur, 2, 2, Padding::same);
                cur = br.pools.back().out;
            }
            branches_.push_back(std::move(br));
        }
    }

    void forward(std::span<const T> in, std::span<T> out, bool, Rng*) override
    {
        const auto& is = this->in_shape_;
        const std::size_t block = std::size_t(is.c) * this->out_shape_.spatial();
        for (std::size_t b = 0; b < branches_.size(); ++b) {
            auto& br = branches_[b];
            br.stages.resize(br.pools.size() + 1);
            auto& crop = br.stages[0];
            crop.resize(br.crop.count());
            for (int c = 0; c < is.c; ++c)
                for (int z = 0; z < br.crop.z; ++z)
                    for (int y = 0; y < br.crop.y; ++y)
                        for (int x = 0; x < br.crop.x; ++x)
                            crop[at(br.crop, c, x, y, z)] =
                                in[at(is, c, x + br.start[0], y + br.start[1], z + br.start[2])];
            for (std::size_t k = 0; k < br.pools.size(); ++k) {
                br.stages[k + 1].resize(br.pools[k].out.count());
                br.pools[k].forward(br.stages[k].data(), br.stages[k + 1].data());
            }
            const auto& last = br.stages.back();
            std::copy(last.begin(), last.end(), out.begin() + std::ptrdiff_t(block * b));
        }
    }

    void backward(std::span<const T>, std::span<const T>, std::span<const T> grad_out, std::span<T> grad_in) override
    {
        const auto& is = this->in_shape_;
        std::fill(grad_in.begin(), grad_in.end(), T(0));
        const std::size_t block = std::size_t(is.c) * this->out_shape_.spatial();
        for (std::size_t b = 0; b < branches_.size(); ++b) {
            auto& br = branches_[b];
            std::vector<T> g(grad_out.begin() + std::ptrdiff_t(block * b), grad_out.begin() + std::ptrdiff_t(block * (b + 1)));
            for (std::size_t k = br.pools.size(); k-- > 0;) {
                std::vector<T> prev(br.pools[k].in.count(), T(0));
                br.pools[k].backward(g.data(), prev.data());
                g.swap(prev);
            }
            for (int c = 0; c < is.c; ++c)
                for (int z = 0; z < br.crop.z; ++z)
                    for (int y = 0; y < br.crop.y; ++y)
                        for (int x = 0; x < br.crop.x; ++x)
                            grad_in[at(is, c, x + br.start[0], y + br.start[1], z + br.start[2])] +=
                                g[at(br.crop, c, x, y, z)];
        }
    }

private:
    struct Branch {
        FeatureShape crop;
        int start[3]{};
        std::vector<PoolOp<T>> pools;
        std::vector<std::vector<T>> stages;
    };
    std::vector<Branch> branches_;
};

template <class T>
class DenseLayer final : public Layer<T> {
public:
    DenseLayer(int units, FeatureShape in, Rng& rng) : Layer<T>(in, {units, 1, 1, 1})
    {
        const std::size_t n_in = in.count();
        this->allocate(n_in * units + units);
        he_uniform(std::span<T>(this->params_).subspan(0, n_in * units), n_in, rng);
    }

    void forward(std::span<const T> in, std::span<T> out, bool, Rng*) override
    {
        const std::size_t n_in = in.size();
        const T* w = this->params_.data();
        const T* b = w + n_in * out.size();
        for (std::size_t o = 0; o < out.size(); ++o) {
            const T* row = w + o * n_in;
            T acc = b[o];
            for (std::size_t i = 0; i < n_in; ++i)
                acc += row[i] * in[i];
            out[o] = acc;
        }
    }

    void backward(std::span<const T> in, std::span<const T>, std::span<const T> grad_out, std::span<T> grad_in) override
    {
        const std::size_t n_in = in.size();
        const std::size_t n_out = grad_out.size();
        const T* w = this->params_.data();
        T* gw = this->grads_.data();
        T* gb = gw + n_in * n_out;
        std::fill(grad_in.begin(), grad_in.end(), T(0));
        for (std::size_t o = 0; o < n_out; ++o) {
            const T g = grad_out[o];
            gb[o] += g;
            if (g == T(0))
                continue;
            const T* row = w + o * n_in;
            T* grow = gw + o * n_in;
            for (std::size_t i = 0; i < n_in; ++i) {
                grow[i] += g * in[i];
                grad_in[i] += g * row[i];
            }
        }
    }
};

template <class T>
class LayerNormReLULayer final : public Layer<T> {
public:
    static constexpr double kEps = 1e-5;

    explicit LayerNormReLULayer(FeatureShape in) : Layer<T>(in, in)
    {
        this->allocate(2 * std::size_t(in.c));
        std::fill(this->params_.begin(), this->params_.begin() + in.c, T(1));
    }

    void forward(std::span<const T> in, std::span<T> out, bool, Rng*) override
    {
        const auto& s = this->in_shape_;
        const std::size_t n = in.size();
        double mean = 0;
        for (T v : in)
            mean += double(v);
        mean /= double(n);
        double var = 0;
        for (T v : in)
            var += (double(v) - mean) * (double(v) - mean);
        var /= double(n);
        inv_std_ = 1.0 / std::sqrt(var + kEps);
        normalized_.resize(n);
        const T* gamma = this->params_.data();
        const T* beta = gamma + s.c;
        const std::size_t sp = s.spatial();
        for (int c = 0; c < s.c; ++c)
            for (std::size_t p = 0; p < sp; ++p) {
                const std::size_t i = sp * c + p;
                const T xhat = T((double(in[i]) - mean) * inv_std_);
                normalized_[i] = xhat;
                const T z = xhat * gamma[c] + beta[c];
                out[i] = z > T(0) ? z : T(0);
            }
    }

    void backward(std::span<const T>, std::span<const T> out, std::span<const T> grad_out, std::span<T> grad_in) override
    {
        const auto& s = this->in_shape_;
        const std::size_t n = grad_out.size();
        const std::size_t sp = s.spatial();
        const T* gamma = this->params_.data();
        T* ggamma = this->grads_.data();
        T* gbeta = ggamma + s.c;
        std::vector<double> dxhat(n);
        double sum_d = 0, sum_dx = 0;
        for (int c = 0; c < s.c; ++c)
            for (std::size_t p = 0; p < sp; ++p) {
                const std::size_t i = sp * c + p;
                // ReLU gate: out > 0 iff the pre-activation was positive
                const T dz = out[i] > T(0) ? grad_out[i] : T(0);
                ggamma[c] += dz * normalized_[i];
                gbeta[c] += dz;
                dxhat[i] = double(dz) * double(gamma[c]);
                sum_d += dxhat[i];
                sum_dx += dxhat[i] * double(normalized_[i]);
            }
        const double mean_d = sum_d / double(n), mean_dx = sum_dx / double(n);
        for (std::size_t i = 0; i < n; ++i)
            grad_in[i] = T(inv_std_ * (dxhat[i] - mean_d - double(normalized_[i]) * mean_dx));
    }

private:
    std::vector<T> normalized_;
    double inv_std_ = 1.0;
};

template <class T>
class DropoutLayer final : public Layer<T> {
public:
    DropoutLayer(const Dropout& spec, FeatureShape in) : Layer<T>(in, in), keep_(spec.keep_prob) {}

    void forward(std::span<const T> in, std::span<T> out, bool train, Rng* rng) override
    {
        if (!train || keep_ >= 1.0) {
            std::copy(in.begin(), in.end(), out.begin());
            scale_.assign(in.size(), T(1));
            return;
        }
        if (rng || scale_.size() != in.size()) {
            if (!rng)
                throw ComputeError("dropout replay requested before any draw");
            scale_.resize(in.size());
            const T s = T(1.0 / keep_);
            for (auto& m : scale_)
                m = rng->uniform() < keep_ ? s : T(0);
        }
        for (std::size_t i = 0; i < in.size(); ++i)
            out[i] = in[i] * scale_[i];
    }

    void backward(std::span<const T>, std::span<const T>, std::span<const T> grad_out, std::span<T> grad_in) override
    {
        for (std::size_t i = 0; i < grad_out.size(); ++i)
            grad_in[i] = grad_out[i] * scale_[i];
    }

private:
    double keep_;
    std::vector<T> scale_;
};

} // namespace

template <class T>
std::unique_ptr<Layer<T>> make_layer(const LayerSpec& spec, FeatureShape in, Rng& rng)
{
    return std::visit(overloaded{
                          [&](const Conv3D& c) -> std::unique_ptr<Layer<T>> {
                              return std::make_unique<Conv3DLayer<T>>(c, in, rng);
                          },
                          [&](const MaxPool3D& p) -> std::unique_ptr<Layer<T>> {
                              return std::make_unique<MaxPoolLayer<T>>(p, in);
                          },
                          [&](const MultiCrop& m) -> std::unique_ptr<Layer<T>> {
                              return std::make_unique<MultiCropLayer<T>>(m, in);
                          },
                          [&](const Dense& d) -> std::unique_ptr<Layer<T>> {
                              return std::make_unique<DenseLayer<T>>(d.units, in, rng);
                          },
                          [&](const LayerNormReLU&) -> std::unique_ptr<Layer<T>> {
                              return std::make_unique<LayerNormReLULayer<T>>(in);
                          },
                          [&](const Dropout& d) -> std::unique_ptr<Layer<T>> {
                              return std::make_unique<DropoutLayer<T>>(d, in);
                          },
                          [&](const Output& o) -> std::unique_ptr<Layer<T>> {
                              return std::make_unique<DenseLayer<T>>(o.units, in, rng);
                          },
                      },
                      spec);
}

template std::unique_ptr<Layer<float>> make_layer<float>(const LayerSpec&, FeatureShape, Rng&);
template std::unique_ptr<Layer<double>> make_layer<double>(const LayerSpec&, FeatureShape, Rng&);

} // namespace nodfuse::neural
