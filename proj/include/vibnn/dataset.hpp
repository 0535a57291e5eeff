#ifndef VIBNN_DATASET_HPP
#define VIBNN_DATASET_HPP

#include <string>
#include <vector>

#include "vibnn/tensor.hpp"

namespace vibnn::io {

struct Dataset {
    Matrix features;           // n x d
    std::vector<int> labels;   // n
    int num_classes = 0;
};

// IDX image file (magic 0x00000803): pixels scaled to [0,1], images
// flattened row-major.
Matrix read_idx_images(const std::string& path);
// IDX label file (magic 0x00000801).
std::vector<int> read_idx_labels(const std::string& path);
// Convenience: images + labels, classes inferred from labels.
Dataset read_idx(const std::string& images_path, const std::string& labels_path);

struct CsvSchema {
    int label_column = -1;         // required
    bool has_header = true;
    std::vector<int> feature_columns;  // empty = all non-label columns
};

// Numeric CSV with a class label column. No normalization applied here.
Dataset read_csv_labeled(const std::string& path, const CsvSchema& schema);

struct ZScoreStats {
    std::vector<double> mean, stddev;
    std::vector<int> zero_variance_columns;
};

// Fit on the training split only; apply maps zero-variance columns to zero.
ZScoreStats zscore_fit(const Matrix& train_features);
void zscore_apply(Matrix& features, const ZScoreStats& stats);

// Deterministic stratified-by-class subsample.
Dataset subsample(const Dataset& data, double fraction, uint64_t seed,
                  std::vector<int>* vanished_classes = nullptr);

}  // namespace vibnn::io

#endif
