#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "fedbba/numerics.hpp"

namespace fedbba {

struct ImageDataset {
    Matrix images;            // n × (h·w), intensities in [0,1]
    std::vector<int> labels;  // in [0, classes)
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t classes = 0;

    std::size_t size() const { return labels.size(); }
    std::size_t pixels() const { return height * width; }
    ImageDataset subset(const std::vector<std::size_t>& rows) const;
    void validate() const;
};

// Fixed class templates: a 4×4 grid of blocks, each class lighting a distinct
// codeword of blocks. Never lights more than two blocks of the top block row,
// so a full-row trigger is never part of a clean image.
Matrix class_templates(std::size_t classes, std::size_t height, std::size_t width);

ImageDataset generate_dataset(std::size_t classes, std::size_t per_class, std::size_t height,
                              std::size_t width, double noise_sigma, RngStream& rng);

struct Range {
    std::size_t lo = 0;
    std::size_t hi = 0;
};

// Each client receives a uniformly drawn set of classes (size in
// classes_per_client) and, per class, a sample count in samples_per_class
// drawn with replacement from that class's pool.
std::vector<ImageDataset> partition_noniid(const ImageDataset& ds, std::size_t n_clients,
                                           Range classes_per_client, Range samples_per_class,
                                           RngStream& rng);

void write_dataset_csv(const ImageDataset& ds, const std::string& path);
ImageDataset read_dataset_csv(const std::string& path, std::size_t height, std::size_t width,
                              std::size_t classes);

// One-hidden-layer perceptron: inputs → hidden (tanh) → classes (softmax).
struct ModelShape {
    std::size_t inputs = 64;
    std::size_t hidden = 32;
    std::size_t classes = 10;

    std::size_t parameter_count() const { return hidden * inputs + hidden + classes * hidden + classes; }
    friend bool operator==(const ModelShape&, const ModelShape&) = default;
};

struct ModelParams {
    ModelShape shape;
    Vector flat;  // W1 (hidden×inputs), b1, W2 (classes×hidden), b2

    friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

struct MlpLayers {
    Matrix w1;
    Vector b1;
    Matrix w2;
    Vector b2;
};

MlpLayers unflatten(const ModelParams& params);
ModelParams flatten(const MlpLayers& layers);

ModelParams init_model(const ModelShape& shape, RngStream& rng);

struct TrainConfig {
    double learning_rate = 0.1;
    std::size_t epochs = 2;
    std::size_t batch_size = 16;

    void validate() const;
};

struct LossGradient {
    double loss = 0.0;  // mean softmax cross-entropy
    Vector gradient;    // same layout as ModelParams::flat
};

LossGradient loss_and_gradient(const ModelParams& params, const ImageDataset& ds,
                               std::span<const std::size_t> rows);

// Mini-batch SGD on softmax cross-entropy; batches are reshuffled each epoch.
ModelParams train_local(const ModelParams& start, const ImageDataset& ds, const TrainConfig& cfg,
                        RngStream& rng);

Vector logits(const ModelParams& params, std::span<const double> image);
// Argmax of the logits; ties go to the lowest class index.
int predict(const ModelParams& params, std::span<const double> image);
double evaluate(const ModelParams& params, const ImageDataset& ds);

} // namespace fedbba
