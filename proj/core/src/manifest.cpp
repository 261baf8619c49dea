// Copyright (c) 2026 The cxrcascade authors
// SPDX-License-Identifier: Apache-2.0

#include "cxr/manifest.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <set>
#include <unordered_set>

#include "cxr/csv.hpp"
#include "cxr/error.hpp"

namespace fs = std::filesystem;

namespace cxr {

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

// The fourteen ChestX-ray14 pathology labels (underscores in the published
// CSV are tolerated alongside spaces).
const std::set<std::string>& known_cx14_labels() {
    static const std::set<std::string> kLabels = {
        "atelectasis", "consolidation", "infiltration", "pneumothorax", "edema",
        "emphysema",   "fibrosis",      "effusion",     "pneumonia",    "pleural thickening",
        "cardiomegaly", "nodule",       "mass",         "hernia"};
    return kLabels;
}

void sort_unique(std::vector<std::string>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
}

}  // namespace

const char* to_string(Malignancy m) {
    switch (m) {
        case Malignancy::malignant: return "malignant";
        case Malignancy::benign: return "benign";
        case Malignancy::none: return "none";
        case Malignancy::unknown: return "unknown";
    }
    return "unknown";
}

const char* to_string(DataSource s) {
    switch (s) {
        case DataSource::jsrt: return "jsrt";
        case DataSource::chestxray14: return "chestxray14";
        case DataSource::synthetic: return "synthetic";
    }
    return "synthetic";
}

const char* to_string(Task t) {
    return t == Task::nodule_vs_nonnodule ? "nodule" : "malignancy";
}

Malignancy malignancy_from_string(const std::string& s) {
    const std::string v = lower(trim(s));
    if (v == "malignant") return Malignancy::malignant;
    if (v == "benign") return Malignancy::benign;
    if (v == "none" || v == "non-nodule" || v == "nonnodule") return Malignancy::none;
    if (v == "unknown" || v.empty()) return Malignancy::unknown;
    throw ParseError("unrecognized malignancy value: '" + s + "'");
}

Task task_from_string(const std::string& s) {
    const std::string v = lower(trim(s));
    if (v == "nodule" || v == "nodule_vs_nonnodule") return Task::nodule_vs_nonnodule;
    if (v == "malignancy" || v == "malignant_vs_nonmalignant")
        return Task::malignant_vs_nonmalignant;
    throw ParseError("unrecognized task: '" + s + "'");
}

bool SampleRecord::has_finding(const std::string& tag) const {
    const std::string t = lower(tag);
    return std::any_of(findings.begin(), findings.end(),
                       [&](const std::string& f) { return lower(f) == t; });
}

int label_of(const SampleRecord& rec, Task task) {
    if (task == Task::nodule_vs_nonnodule) return rec.has_finding("nodule") ? 1 : 0;
    return rec.malignancy == Malignancy::malignant ? 1 : 0;
}

Manifest load_jsrt_manifest(const std::string& root, const std::string& metadata,
                            std::vector<std::string>* warnings) {
    const CsvTable table = csv_read_file(metadata);
    if (table.header.empty()) return Manifest{{}, DataSource::jsrt};
    const std::size_t c_file = table.column("filename");
    const std::size_t c_mal = table.column("malignancy");
    const std::size_t c_x = table.column("nodule_x");
    const std::size_t c_y = table.column("nodule_y");
    const std::size_t c_size = table.column("nodule_size");

    Manifest m;
    m.source = DataSource::jsrt;
    std::vector<std::string> missing;
    std::unordered_set<std::string> seen;
    long line_no = 1;
    for (const auto& row : table.rows) {
        ++line_no;
        if (row.size() < table.header.size())
            throw ParseError("JSRT metadata row has " + std::to_string(row.size()) +
                                 " fields, expected " + std::to_string(table.header.size()),
                             line_no);
        SampleRecord rec;
        const std::string filename = trim(row[c_file]);
        if (filename.empty()) throw ParseError("empty filename", line_no);
        if (!seen.insert(filename).second)
            throw IoError("duplicate image reference in JSRT metadata: " + filename);
        rec.image_ref = (fs::path(root) / filename).string();
        rec.patient_id = fs::path(filename).stem().string();
        rec.malignancy = [&] {
            try {
                return malignancy_from_string(row[c_mal]);
            } catch (const ParseError& e) {
                throw ParseError(e.what(), line_no);
            }
        }();
        if (rec.malignancy == Malignancy::unknown)
            throw ParseError("JSRT metadata requires malignant/benign/none", line_no);
        if (rec.malignancy != Malignancy::none) rec.findings.push_back("nodule");

        const std::string xs = trim(row[c_x]), ys = trim(row[c_y]), ss = trim(row[c_size]);
        if (!xs.empty() && !ys.empty()) {
            try {
                NodulePoint p{std::stod(xs), std::stod(ys)};
                // JSRT sources are 2048x2048; validate raw-file coordinates here,
                // other formats are checked when the image is opened.
                const bool is_raw = lower(fs::path(filename).extension().string()) == ".img";
                if (is_raw && (p.x < 0 || p.y < 0 || p.x >= 2048 || p.y >= 2048))
                    throw ParseError("nodule center (" + xs + "," + ys + ") outside 2048x2048 bounds",
                                     line_no);
                rec.nodule_center = p;
            } catch (const std::invalid_argument&) {
                throw ParseError("malformed nodule coordinates", line_no);
            }
        }
        if (!ss.empty()) {
            try {
                rec.nodule_size = std::stod(ss);
            } catch (const std::invalid_argument&) {
                throw ParseError("malformed nodule size", line_no);
            }
        }
        if (!fs::exists(rec.image_ref)) missing.push_back(rec.image_ref);
        m.records.push_back(std::move(rec));
    }
    if (!missing.empty()) {
        std::string msg = "JSRT ingestion: " + std::to_string(missing.size()) + " missing image file(s):";
        for (const auto& p : missing) msg += "\n  " + p;
        throw IoError(msg);
    }
    (void)warnings;
    return m;
}

Manifest load_chestxray14_manifest(const std::string& root, const std::string& labels_csv,
                                   std::vector<std::string>* warnings) {
    const CsvTable table = csv_read_file(labels_csv);
    if (table.header.empty()) return Manifest{{}, DataSource::chestxray14};
    const std::size_t c_file = table.column("Image Index");
    const std::size_t c_labels = table.column("Finding Labels");
    const std::size_t c_patient = table.column("Patient ID");

    Manifest m;
    m.source = DataSource::chestxray14;
    std::vector<std::string> missing;
    std::unordered_set<std::string> seen;
    long line_no = 1;
    for (const auto& row : table.rows) {
        ++line_no;
        if (row.size() < table.header.size())
            throw ParseError("labels CSV row has " + std::to_string(row.size()) +
                                 " fields, expected " + std::to_string(table.header.size()),
                             line_no);
        SampleRecord rec;
        const std::string filename = trim(row[c_file]);
        if (filename.empty()) throw ParseError("empty Image Index", line_no);
        if (!seen.insert(filename).second)
            throw IoError("duplicate image reference in labels CSV: " + filename);
        rec.image_ref = (fs::path(root) / filename).string();
        rec.patient_id = trim(row[c_patient]);
        rec.malignancy = Malignancy::unknown;  // dataset carries no malignancy labels

        // Pipe-separated finding tags; "No Finding" means an empty set.
        std::string labels = row[c_labels];
        std::size_t start = 0;
        while (start <= labels.size()) {
            std::size_t bar = labels.find('|', start);
            if (bar == std::string::npos) bar = labels.size();
            std::string tok = trim(labels.substr(start, bar - start));
            start = bar + 1;
            if (tok.empty()) continue;
            std::string norm = lower(tok);
            std::replace(norm.begin(), norm.end(), '_', ' ');
            if (norm == "no finding") continue;
            if (known_cx14_labels().count(norm) == 0 && warnings)
                warnings->push_back("unknown finding label '" + tok + "' at line " +
                                    std::to_string(line_no) + " (kept verbatim)");
            rec.findings.push_back(known_cx14_labels().count(norm) ? norm : tok);
        }
        sort_unique(rec.findings);
        if (!fs::exists(rec.image_ref)) missing.push_back(rec.image_ref);
        m.records.push_back(std::move(rec));
    }
    if (!missing.empty()) {
        std::string msg =
            "ChestX-ray14 ingestion: " + std::to_string(missing.size()) + " missing image file(s):";
        for (const auto& p : missing) msg += "\n  " + p;
        throw IoError(msg);
    }
    return m;
}

void save_manifest_csv(const std::string& path, const Manifest& m) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write manifest: " + path);
    out << "image_ref,patient_id,findings,malignancy,nodule_x,nodule_y,nodule_size\n";
    for (const auto& rec : m.records) {
        std::string findings;
        for (std::size_t i = 0; i < rec.findings.size(); ++i) {
            if (i) findings += '|';
            findings += rec.findings[i];
        }
        std::vector<std::string> fields = {
            rec.image_ref,
            rec.patient_id,
            findings,
            to_string(rec.malignancy),
            rec.nodule_center ? std::to_string(rec.nodule_center->x) : "",
            rec.nodule_center ? std::to_string(rec.nodule_center->y) : "",
            rec.nodule_size ? std::to_string(*rec.nodule_size) : ""};
        out << csv_join(fields) << '\n';
    }
    if (!out) throw IoError("write failed: " + path);
}

Manifest load_manifest_csv(const std::string& path, DataSource source) {
    const CsvTable table = csv_read_file(path);
    Manifest m;
    m.source = source;
    if (table.header.empty()) return m;
    const std::size_t c_ref = table.column("image_ref");
    const std::size_t c_pid = table.column("patient_id");
    const std::size_t c_find = table.column("findings");
    const std::size_t c_mal = table.column("malignancy");
    const std::size_t c_x = table.column("nodule_x");
    const std::size_t c_y = table.column("nodule_y");
    const std::size_t c_size = table.column("nodule_size");

    std::unordered_set<std::string> seen;
    long line_no = 1;
    for (const auto& row : table.rows) {
        ++line_no;
        if (row.size() < table.header.size())
            throw ParseError("manifest row too short", line_no);
        SampleRecord rec;
        rec.image_ref = row[c_ref];
        if (!seen.insert(rec.image_ref).second)
            throw IoError("duplicate image_ref in manifest: " + rec.image_ref);
        rec.patient_id = row[c_pid];
        std::size_t start = 0;
        const std::string& fl = row[c_find];
        while (start <= fl.size() && !fl.empty()) {
            std::size_t bar = fl.find('|', start);
            if (bar == std::string::npos) bar = fl.size();
            std::string tok = trim(fl.substr(start, bar - start));
            if (!tok.empty()) rec.findings.push_back(tok);
            start = bar + 1;
        }
        sort_unique(rec.findings);
        try {
            rec.malignancy = malignancy_from_string(row[c_mal]);
            if (!trim(row[c_x]).empty() && !trim(row[c_y]).empty())
                rec.nodule_center = NodulePoint{std::stod(row[c_x]), std::stod(row[c_y])};
            if (!trim(row[c_size]).empty()) rec.nodule_size = std::stod(row[c_size]);
        } catch (const ParseError& e) {
            throw ParseError(e.what(), line_no);
        } catch (const std::invalid_argument&) {
            throw ParseError("malformed numeric field", line_no);
        }
        m.records.push_back(std::move(rec));
    }
    return m;
}

}  // namespace cxr
