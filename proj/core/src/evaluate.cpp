#include "hwdnet/evaluate.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <torch/torch.h>

#include "hwdnet/error.hpp"

namespace hwdnet {

Embeddings embed_index(HwdNetImpl& model, const ImageStore& store, int batch_size) {
  const auto& index = store.index();
  const std::size_t n = index.size();
  const bool was_training = model.is_training();
  model.eval();
  torch::NoGradGuard no_grad;

  Embeddings out;
  out.features = Matrix(n, static_cast<std::size_t>(model.decoupler->mu_dim()));
  for (const auto& r : index.records()) {
    out.identities.push_back(r.identity);
    out.modalities.push_back(r.modality);
    out.cameras.push_back(r.camera);
  }
  // batches never mix modalities
  for (Modality m : {Modality::rgb, Modality::ir}) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < n; ++i) {
      if (index.record(i).modality == m) rows.push_back(i);
    }
    for (std::size_t begin = 0; begin < rows.size(); begin += static_cast<std::size_t>(batch_size)) {
      const auto end = std::min(rows.size(), begin + static_cast<std::size_t>(batch_size));
      std::vector<torch::Tensor> images;
      for (auto k = begin; k < end; ++k) images.push_back(store.get(rows[k]));
      const auto mu = model.embed(torch::stack(images), m).to(torch::kFloat64).contiguous();
      const auto* p = mu.data_ptr<double>();
      for (auto k = begin; k < end; ++k) {
        std::copy_n(p + (k - begin) * out.features.cols, out.features.cols,
                    out.features.data.begin() + static_cast<std::ptrdiff_t>(rows[k] * out.features.cols));
      }
    }
  }
  model.train(was_training);
  return out;
}

namespace {

Matrix select_rows(const Matrix& m, const std::vector<std::size_t>& rows) {
  Matrix out(rows.size(), m.cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto src = m.row(rows[i]);
    std::copy(src.begin(), src.end(), out.data.begin() + static_cast<std::ptrdiff_t>(i * m.cols));
  }
  return out;
}

SeedResult run_once(const Embeddings& emb, const QueryGallery& qg, const EvalSettings& settings) {
  std::vector<std::int64_t> qids, gids;
  RankingOptions opts;
  opts.exclude_same_camera = settings.exclude_same_camera;
  for (auto i : qg.query) {
    qids.push_back(emb.identities[i]);
    opts.query_cameras.push_back(emb.cameras[i]);
  }
  for (auto i : qg.gallery) {
    gids.push_back(emb.identities[i]);
    opts.gallery_cameras.push_back(emb.cameras[i]);
  }
  const auto dist = pairwise_distances(select_rows(emb.features, qg.query), select_rows(emb.features, qg.gallery));
  SeedResult r;
  r.cmc = cmc_curve(dist, qids, gids, settings.max_rank, opts);
  r.map = mean_average_precision(dist, qids, gids, opts);
  return r;
}

}  // namespace

EvalReport evaluate_embeddings(const Embeddings& emb, const DatasetIndex& index, Direction direction, Shot shot,
                               const EvalSettings& settings) {
  if (emb.features.rows != index.size()) {
    throw DimensionError("embeddings have " + std::to_string(emb.features.rows) + " rows for " +
                         std::to_string(index.size()) + " records");
  }
  EvalReport report;
  report.direction = direction;
  report.shot = shot;
  report.cmc.assign(static_cast<std::size_t>(settings.max_rank), 0.0);

  if (shot == Shot::multi) {
    Rng rng(0);
    const auto qg = split_query_gallery(index, direction, shot, rng);
    const auto r = run_once(emb, qg, settings);
    report.cmc = r.cmc;
    report.map = r.map;
    report.num_queries = qg.query.size();
    report.num_gallery = qg.gallery.size();
    return report;
  }

  for (int s = 0; s < settings.single_shot_seeds; ++s) {
    const auto seed = static_cast<std::uint64_t>(s);
    Rng rng(seed);
    const auto qg = split_query_gallery(index, direction, shot, rng);
    auto r = run_once(emb, qg, settings);
    r.seed = seed;
    for (std::size_t k = 0; k < report.cmc.size(); ++k) report.cmc[k] += r.cmc[k];
    report.map += r.map;
    report.num_queries = qg.query.size();
    report.num_gallery = qg.gallery.size();
    report.seeds.push_back(seed);
    report.per_seed.push_back(std::move(r));
  }
  const auto n = static_cast<double>(settings.single_shot_seeds);
  for (auto& v : report.cmc) v /= n;
  report.map /= n;
  return report;
}

EvalReport evaluate_protocol(HwdNetImpl& model, const ImageStore& store, Direction direction, Shot shot,
                             const EvalSettings& settings) {
  return evaluate_embeddings(embed_index(model, store), store.index(), direction, shot, settings);
}

void write_embeddings_tsv(const Embeddings& emb, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw IoError("cannot write " + file.string());
  char buf[32];
  for (std::size_t i = 0; i < emb.features.rows; ++i) {
    out << emb.identities[i] << '\t' << to_string(emb.modalities[i]) << '\t' << emb.cameras[i];
    for (double v : emb.features.row(i)) {
      std::snprintf(buf, sizeof buf, "%.9g", v);
      out << '\t' << buf;
    }
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + file.string());
}

Embeddings read_embeddings_tsv(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ValidationError("cannot read embeddings file " + file.string());
  Embeddings emb;
  std::vector<double> values;
  std::string line;
  std::size_t cols = 0;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string id, modality, camera, cell;
    if (!std::getline(row, id, '\t') || !std::getline(row, modality, '\t') || !std::getline(row, camera, '\t')) {
      throw ParseError(file.string() + ":" + std::to_string(line_no) + ": expected identity, modality, camera");
    }
    std::size_t n = 0;
    try {
      emb.identities.push_back(std::stoll(id));
      emb.cameras.push_back(std::stoi(camera));
      emb.modalities.push_back(parse_modality(modality));
      while (std::getline(row, cell, '\t')) {
        values.push_back(std::stod(cell));
        ++n;
      }
    } catch (const std::logic_error&) {
      throw ParseError(file.string() + ":" + std::to_string(line_no) + ": malformed number");
    }
    if (cols == 0) cols = n;
    if (n == 0 || n != cols) {
      throw ParseError(file.string() + ":" + std::to_string(line_no) + ": inconsistent feature width");
    }
  }
  emb.features = Matrix(emb.identities.size(), cols);
  emb.features.data = std::move(values);
  return emb;
}

}  // namespace hwdnet
