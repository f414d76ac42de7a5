#include "fedbba/datamodel.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "fedbba/errors.hpp"

namespace fedbba {

ImageDataset ImageDataset::subset(const std::vector<std::size_t>& rows) const {
    ImageDataset out{Matrix(rows.size(), pixels()), {}, height, width, classes};
    out.labels.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        auto src = images.row(rows[i]);
        std::copy(src.begin(), src.end(), out.images.row(i).begin());
        out.labels.push_back(labels[rows[i]]);
    }
    return out;
}

void ImageDataset::validate() const {
    if (images.rows() != labels.size()) throw InvalidInput("image/label count mismatch");
    if (images.cols() != pixels()) throw InvalidInput("image width does not match h*w");
    for (int l : labels)
        if (l < 0 || static_cast<std::size_t>(l) >= classes) throw InvalidInput("label out of range");
    for (double v : images.data())
        if (!(v >= 0.0 && v <= 1.0)) throw InvalidInput("intensity outside [0,1]");
}

Matrix class_templates(std::size_t classes, std::size_t height, std::size_t width) {
    if (classes < 2) throw InvalidInput("need at least 2 classes");
    if (height < 4 || width < 4) throw InvalidInput("images must be at least 4x4");

    std::vector<unsigned> codes;
    for (unsigned i = 0; i < 65536 && codes.size() < classes; ++i) {
        const unsigned code = (i * 40503u + 1u) & 0xFFFFu;  // odd multiplier: a permutation
        const int weight = std::popcount(code);
        if (weight < 5 || weight > 11) continue;
        if (std::popcount(code & 0xFu) > 2) continue;
        const bool far = std::all_of(codes.begin(), codes.end(),
                                     [code](unsigned c) { return std::popcount(c ^ code) >= 5; });
        if (far) codes.push_back(code);
    }
    if (codes.size() < classes) throw InvalidInput("cannot build that many distinct templates");

    Matrix t(classes, height * width);
    for (std::size_t c = 0; c < classes; ++c)
        for (std::size_t r = 0; r < height; ++r)
            for (std::size_t q = 0; q < width; ++q) {
                const std::size_t block = (r * 4 / height) * 4 + (q * 4 / width);
                t(c, r * width + q) = (codes[c] >> block) & 1u ? 1.0 : 0.0;
            }
    return t;
}

ImageDataset generate_dataset(std::size_t classes, std::size_t per_class, std::size_t height,
                              std::size_t width, double noise_sigma, RngStream& rng) {
    const Matrix templates = class_templates(classes, height, width);
    ImageDataset ds{Matrix(classes * per_class, height * width), {}, height, width, classes};
    ds.labels.reserve(classes * per_class);
    std::size_t row = 0;
    for (std::size_t c = 0; c < classes; ++c) {
        for (std::size_t i = 0; i < per_class; ++i, ++row) {
            auto out = ds.images.row(row);
            auto tmpl = templates.row(c);
            for (std::size_t p = 0; p < out.size(); ++p) {
                const double noise = noise_sigma > 0.0 ? noise_sigma * rng.normal() : 0.0;
                out[p] = std::clamp(tmpl[p] + noise, 0.0, 1.0);
            }
            ds.labels.push_back(static_cast<int>(c));
        }
    }
    return ds;
}

std::vector<ImageDataset> partition_noniid(const ImageDataset& ds, std::size_t n_clients,
                                           Range classes_per_client, Range samples_per_class,
                                           RngStream& rng) {
    if (n_clients < 1) throw InvalidConfig("partition needs at least one client");
    if (classes_per_client.lo < 1 || classes_per_client.lo > classes_per_client.hi ||
        classes_per_client.hi > ds.classes)
        throw InvalidConfig("classes_per_client range infeasible for " + std::to_string(ds.classes) +
                            " classes");
    if (samples_per_class.lo < 1 || samples_per_class.lo > samples_per_class.hi)
        throw InvalidConfig("samples_per_class range infeasible");

    std::vector<std::vector<std::size_t>> pool(ds.classes);
    for (std::size_t i = 0; i < ds.size(); ++i) pool[static_cast<std::size_t>(ds.labels[i])].push_back(i);
    for (std::size_t c = 0; c < ds.classes; ++c)
        if (pool[c].empty()) throw InvalidConfig("class " + std::to_string(c) + " has no samples");

    std::vector<ImageDataset> shards;
    shards.reserve(n_clients);
    std::vector<std::size_t> class_ids(ds.classes);
    for (std::size_t i = 0; i < n_clients; ++i) {
        for (std::size_t c = 0; c < ds.classes; ++c) class_ids[c] = c;
        rng.shuffle(class_ids);
        const std::size_t k = rng.between(classes_per_client.lo, classes_per_client.hi);
        std::vector<std::size_t> chosen(class_ids.begin(), class_ids.begin() + static_cast<std::ptrdiff_t>(k));
        std::sort(chosen.begin(), chosen.end());
        std::vector<std::size_t> rows;
        for (std::size_t c : chosen) {
            const std::size_t m = rng.between(samples_per_class.lo, samples_per_class.hi);
            for (std::size_t s = 0; s < m; ++s) rows.push_back(pool[c][rng.below(pool[c].size())]);
        }
        shards.push_back(ds.subset(rows));
    }
    return shards;
}

void write_dataset_csv(const ImageDataset& ds, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw InvalidInput("cannot open " + path + " for writing");
    char buf[32];
    for (std::size_t i = 0; i < ds.size(); ++i) {
        f << ds.labels[i];
        for (double v : ds.images.row(i)) {
            std::snprintf(buf, sizeof buf, ",%.17g", v);
            f << buf;
        }
        f << '\n';
    }
}

ImageDataset read_dataset_csv(const std::string& path, std::size_t height, std::size_t width,
                              std::size_t classes) {
    std::ifstream f(path);
    if (!f) throw InvalidInput("cannot open " + path);
    ImageDataset ds{Matrix(), {}, height, width, classes};
    Vector values;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::getline(ss, cell, ',');
        ds.labels.push_back(std::stoi(cell));
        std::size_t count = 0;
        while (std::getline(ss, cell, ',')) {
            values.push_back(std::stod(cell));
            ++count;
        }
        if (count != height * width)
            throw InvalidInput(path + ":" + std::to_string(lineno) + " has " + std::to_string(count) +
                               " pixels, expected " + std::to_string(height * width));
    }
    ds.images = Matrix(ds.labels.size(), height * width, std::move(values));
    ds.validate();
    return ds;
}

MlpLayers unflatten(const ModelParams& params) {
    const ModelShape& s = params.shape;
    if (params.flat.size() != s.parameter_count()) throw InvalidInput("parameter vector does not match shape");
    auto it = params.flat.begin();
    auto take = [&it](std::size_t n) {
        Vector v(it, it + static_cast<std::ptrdiff_t>(n));
        it += static_cast<std::ptrdiff_t>(n);
        return v;
    };
    MlpLayers l;
    l.w1 = Matrix(s.hidden, s.inputs, take(s.hidden * s.inputs));
    l.b1 = take(s.hidden);
    l.w2 = Matrix(s.classes, s.hidden, take(s.classes * s.hidden));
    l.b2 = take(s.classes);
    return l;
}

ModelParams flatten(const MlpLayers& l) {
    ModelParams p{{l.w1.cols(), l.w1.rows(), l.w2.rows()}, {}};
    if (l.b1.size() != l.w1.rows() || l.w2.cols() != l.w1.rows() || l.b2.size() != l.w2.rows())
        throw InvalidInput("inconsistent layer shapes");
    p.flat.reserve(p.shape.parameter_count());
    p.flat.insert(p.flat.end(), l.w1.data().begin(), l.w1.data().end());
    p.flat.insert(p.flat.end(), l.b1.begin(), l.b1.end());
    p.flat.insert(p.flat.end(), l.w2.data().begin(), l.w2.data().end());
    p.flat.insert(p.flat.end(), l.b2.begin(), l.b2.end());
    return p;
}

ModelParams init_model(const ModelShape& shape, RngStream& rng) {
    ModelParams p{shape, Vector(shape.parameter_count(), 0.0)};
    const double a1 = std::sqrt(6.0 / static_cast<double>(shape.inputs + shape.hidden));
    const double a2 = std::sqrt(6.0 / static_cast<double>(shape.hidden + shape.classes));
    std::size_t i = 0;
    for (std::size_t k = 0; k < shape.hidden * shape.inputs; ++k) p.flat[i++] = rng.uniform(-a1, a1);
    i += shape.hidden;
    for (std::size_t k = 0; k < shape.classes * shape.hidden; ++k) p.flat[i++] = rng.uniform(-a2, a2);
    return p;
}

void TrainConfig::validate() const {
    if (!(learning_rate >= 0.0)) throw InvalidConfig("train.learning_rate must be >= 0");
    if (epochs < 1) throw InvalidConfig("train.epochs must be >= 1");
    if (batch_size < 1) throw InvalidConfig("train.batch_size must be >= 1");
}

namespace {

// Offsets into the flat layout.
struct Layout {
    std::size_t w1, b1, w2, b2;
    explicit Layout(const ModelShape& s)
        : w1(0), b1(s.hidden * s.inputs), w2(b1 + s.hidden), b2(w2 + s.classes * s.hidden) {}
};

void forward(const ModelParams& p, const Layout& at, std::span<const double> x, Vector& hidden, Vector& out) {
    const ModelShape& s = p.shape;
    const double* w = p.flat.data();
    hidden.assign(s.hidden, 0.0);
    for (std::size_t h = 0; h < s.hidden; ++h) {
        double z = w[at.b1 + h];
        const double* row = w + at.w1 + h * s.inputs;
        for (std::size_t i = 0; i < s.inputs; ++i) z += row[i] * x[i];
        hidden[h] = std::tanh(z);
    }
    out.assign(s.classes, 0.0);
    for (std::size_t k = 0; k < s.classes; ++k) {
        double z = w[at.b2 + k];
        const double* row = w + at.w2 + k * s.hidden;
        for (std::size_t h = 0; h < s.hidden; ++h) z += row[h] * hidden[h];
        out[k] = z;
    }
}

void check_compatible(const ModelParams& p, const ImageDataset& ds) {
    if (p.flat.size() != p.shape.parameter_count()) throw InvalidInput("parameter vector does not match shape");
    if (ds.pixels() != p.shape.inputs) throw InvalidInput("image size does not match model inputs");
    if (ds.classes > p.shape.classes) throw InvalidInput("dataset has more classes than the model");
}

} // namespace

LossGradient loss_and_gradient(const ModelParams& params, const ImageDataset& ds,
                               std::span<const std::size_t> rows) {
    check_compatible(params, ds);
    if (rows.empty()) throw InvalidInput("empty batch");
    const ModelShape& s = params.shape;
    const Layout at(s);
    LossGradient out{0.0, Vector(params.flat.size(), 0.0)};
    double* g = out.gradient.data();
    const double* w = params.flat.data();
    Vector hidden;
    Vector z;
    Vector delta_h(s.hidden);
    for (std::size_t r : rows) {
        auto x = ds.images.row(r);
        forward(params, at, x, hidden, z);
        const double zmax = *std::max_element(z.begin(), z.end());
        double sum = 0.0;
        for (double& v : z) sum += (v = std::exp(v - zmax));
        for (double& v : z) v /= sum;
        const auto y = static_cast<std::size_t>(ds.labels[r]);
        out.loss -= std::log(std::max(z[y], 1e-300));
        z[y] -= 1.0;  // dL/dlogits
        std::fill(delta_h.begin(), delta_h.end(), 0.0);
        for (std::size_t k = 0; k < s.classes; ++k) {
            g[at.b2 + k] += z[k];
            double* grow = g + at.w2 + k * s.hidden;
            const double* wrow = w + at.w2 + k * s.hidden;
            for (std::size_t h = 0; h < s.hidden; ++h) {
                grow[h] += z[k] * hidden[h];
                delta_h[h] += z[k] * wrow[h];
            }
        }
        for (std::size_t h = 0; h < s.hidden; ++h) {
            const double d = delta_h[h] * (1.0 - hidden[h] * hidden[h]);
            if (d == 0.0) continue;
            g[at.b1 + h] += d;
            double* grow = g + at.w1 + h * s.inputs;
            for (std::size_t i = 0; i < s.inputs; ++i) grow[i] += d * x[i];
        }
    }
    const double inv = 1.0 / static_cast<double>(rows.size());
    out.loss *= inv;
    for (double& v : out.gradient) v *= inv;
    return out;
}

ModelParams train_local(const ModelParams& start, const ImageDataset& ds, const TrainConfig& cfg,
                        RngStream& rng) {
    cfg.validate();
    if (ds.size() == 0) throw InvalidInput("train_local on empty dataset");
    check_compatible(start, ds);
    ModelParams p = start;
    std::vector<std::size_t> order(ds.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t e = 0; e < cfg.epochs; ++e) {
        rng.shuffle(order);
        for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
            const std::size_t len = std::min(cfg.batch_size, order.size() - b);
            const LossGradient lg = loss_and_gradient(p, ds, std::span(order).subspan(b, len));
            for (std::size_t i = 0; i < p.flat.size(); ++i) p.flat[i] -= cfg.learning_rate * lg.gradient[i];
        }
    }
    return p;
}

Vector logits(const ModelParams& params, std::span<const double> image) {
    if (image.size() != params.shape.inputs) throw InvalidInput("image size does not match model inputs");
    Vector hidden;
    Vector out;
    forward(params, Layout(params.shape), image, hidden, out);
    return out;
}

int predict(const ModelParams& params, std::span<const double> image) {
    const Vector z = logits(params, image);
    return static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
}

double evaluate(const ModelParams& params, const ImageDataset& ds) {
    if (ds.size() == 0) throw InvalidInput("evaluate on empty dataset");
    check_compatible(params, ds);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < ds.size(); ++i)
        if (predict(params, ds.images.row(i)) == ds.labels[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(ds.size());
}

} // namespace fedbba
