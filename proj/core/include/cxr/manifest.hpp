// Copyright (c) 2026 The cxrcascade authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

namespace cxr {

enum class Malignancy { malignant, benign, none, unknown };

enum class DataSource { jsrt, chestxray14, synthetic };

/// Binary task labelings. `nodule_vs_nonnodule` keys off the "nodule"
/// finding tag; `malignant_vs_nonmalignant` treats only records known to be
/// malignant as positive (benign, no-nodule and unlabeled records are all
/// negative).
enum class Task { nodule_vs_nonnodule, malignant_vs_nonmalignant };

const char* to_string(Malignancy m);
const char* to_string(DataSource s);
const char* to_string(Task t);
Malignancy malignancy_from_string(const std::string& s);
Task task_from_string(const std::string& s);

struct NodulePoint {
    double x = 0;
    double y = 0;
};

/// One labeled chest x-ray.
struct SampleRecord {
    std::string image_ref;                  // path to the pixel data
    std::string patient_id;                 // opaque; unique per record when unknown
    std::vector<std::string> findings;      // pathology tags, lowercase, sorted unique
    Malignancy malignancy = Malignancy::unknown;
    std::optional<NodulePoint> nodule_center;  // source-resolution pixels
    std::optional<double> nodule_size;         // pixels

    bool has_finding(const std::string& tag) const;
};

struct Manifest {
    std::vector<SampleRecord> records;
    DataSource source = DataSource::synthetic;
};

/// Total binary relabeling: every record maps to exactly one of {0, 1}.
int label_of(const SampleRecord& rec, Task task);

/// Load a JSRT-style dataset. `metadata` is a CSV with header
///   filename,malignancy,nodule_x,nodule_y,nodule_size
/// where malignancy is one of malignant / benign / none (non-nodule) and the
/// nodule fields may be blank. Image files must exist under `root`; all
/// missing files are reported in one error. Records with a nodule carry the
/// "nodule" finding tag. JSRT has no patient identifiers, so patient_id is
/// the filename stem.
Manifest load_jsrt_manifest(const std::string& root, const std::string& metadata,
                            std::vector<std::string>* warnings = nullptr);

/// Load a ChestX-ray14-style dataset from a Data_Entry_2017-shaped CSV
/// (columns "Image Index", "Finding Labels" pipe-separated, "Patient ID";
/// extra columns ignored). "No Finding" yields an empty finding set; tokens
/// outside the published label set produce a warning and are kept verbatim.
/// Duplicate filenames are an error.
Manifest load_chestxray14_manifest(const std::string& root, const std::string& labels_csv,
                                   std::vector<std::string>* warnings = nullptr);

/// Manifest persistence. Column header:
///   image_ref,patient_id,findings,malignancy,nodule_x,nodule_y,nodule_size
/// with findings pipe-joined.
void save_manifest_csv(const std::string& path, const Manifest& m);
Manifest load_manifest_csv(const std::string& path, DataSource source = DataSource::synthetic);

}  // namespace cxr
