#include "anticipate/evalmoc.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace anticipate {

std::vector<int> segments_to_frames(const SegmentSeq& seq, int horizon_frames) {
  if (horizon_frames < 1) throw InputError("segments_to_frames: H >= 1 required");
  if (seq.labels.empty()) throw InputError("segments_to_frames: empty sequence");
  if (seq.labels.size() != seq.rel_durations.size())
    throw InputError("segments_to_frames: malformed sequence");
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(horizon_frames));
  double cum = 0.0;
  int prev_boundary = 0;
  for (std::size_t m = 0; m < seq.labels.size(); ++m) {
    cum += seq.rel_durations[m];
    int boundary = (m + 1 == seq.labels.size())
                       ? horizon_frames
                       : round_half_up(cum * horizon_frames);
    boundary = std::min(boundary, horizon_frames);
    for (int f = prev_boundary; f < boundary; ++f) out.push_back(seq.labels[m]);
    prev_boundary = std::max(prev_boundary, boundary);
  }
  return out;
}

double moc_accuracy(const std::vector<int>& pred_frames,
                    const std::vector<int>& gt_frames, int num_classes) {
  if (pred_frames.size() != gt_frames.size())
    throw InputError("moc_accuracy: length mismatch");
  std::vector<long> total(static_cast<std::size_t>(num_classes), 0);
  std::vector<long> correct(static_cast<std::size_t>(num_classes), 0);
  for (std::size_t i = 0; i < gt_frames.size(); ++i) {
    int c = gt_frames[i];
    if (c < 0 || c >= num_classes) throw InputError("moc_accuracy: gt label out of range");
    ++total[static_cast<std::size_t>(c)];
    if (pred_frames[i] == c) ++correct[static_cast<std::size_t>(c)];
  }
  double sum = 0.0;
  int present = 0;
  for (int c = 0; c < num_classes; ++c) {
    if (total[static_cast<std::size_t>(c)] == 0) continue;
    sum += static_cast<double>(correct[static_cast<std::size_t>(c)]) /
           static_cast<double>(total[static_cast<std::size_t>(c)]);
    ++present;
  }
  return present == 0 ? 0.0 : sum / present;
}

EvalGrid evaluate(const DecodeFn& decode, const std::vector<const VideoSample*>& test_set,
                  int num_classes, EvalGrid grid, bool video_level) {
  std::size_t n_obs = grid.obs_fracs.size(), n_pred = grid.pred_fracs.size();
  std::size_t n_cells = n_obs * n_pred;
  std::vector<std::vector<long>> total(n_cells,
                                       std::vector<long>(static_cast<std::size_t>(num_classes), 0));
  std::vector<std::vector<long>> correct = total;
  std::vector<double> moc_sum(n_cells, 0.0);
  std::vector<long> moc_count(n_cells, 0);

  for (const VideoSample* vp : test_set) {
    const VideoSample& v = *vp;
    int T = v.num_frames();
    for (std::size_t oi = 0; oi < n_obs; ++oi) {
      int t_o = std::max(1, std::min(round_half_up(grid.obs_fracs[oi] * T), T - 1));
      int h_max = std::min(round_half_up(0.5 * T), T - t_o);
      SegmentSeq pred = decode(v, t_o);
      std::vector<int> pred_frames;
      if (pred.labels.empty()) {
        // decoder produced nothing: repeat the last observed gt label
        pred_frames.assign(static_cast<std::size_t>(h_max),
                           v.frame_labels[static_cast<std::size_t>(t_o - 1)]);
      } else {
        pred_frames = segments_to_frames(pred, h_max);
      }
      for (std::size_t pi = 0; pi < n_pred; ++pi) {
        int h = std::min(round_half_up(grid.pred_fracs[pi] * T), h_max);
        if (h < 1) continue;
        std::size_t cell = oi * n_pred + pi;
        if (video_level) {
          std::vector<int> p(pred_frames.begin(), pred_frames.begin() + h);
          std::vector<int> gt(v.frame_labels.begin() + t_o,
                              v.frame_labels.begin() + t_o + h);
          moc_sum[cell] += moc_accuracy(p, gt, num_classes);
          moc_count[cell] += 1;
        } else {
          for (int f = 0; f < h; ++f) {
            int c = v.frame_labels[static_cast<std::size_t>(t_o + f)];
            ++total[cell][static_cast<std::size_t>(c)];
            if (pred_frames[static_cast<std::size_t>(f)] == c)
              ++correct[cell][static_cast<std::size_t>(c)];
          }
        }
      }
    }
  }

  grid.cells.clear();
  for (std::size_t oi = 0; oi < n_obs; ++oi)
    for (std::size_t pi = 0; pi < n_pred; ++pi) {
      std::size_t cell = oi * n_pred + pi;
      EvalCell ec;
      ec.obs_frac = grid.obs_fracs[oi];
      ec.pred_frac = grid.pred_fracs[pi];
      if (video_level) {
        ec.moc = moc_count[cell] ? moc_sum[cell] / moc_count[cell] : 0.0;
      } else {
        double sum = 0.0;
        int present = 0;
        for (int c = 0; c < num_classes; ++c) {
          if (total[cell][static_cast<std::size_t>(c)] == 0) continue;
          sum += static_cast<double>(correct[cell][static_cast<std::size_t>(c)]) /
                 static_cast<double>(total[cell][static_cast<std::size_t>(c)]);
          ++present;
        }
        ec.moc = present ? sum / present : 0.0;
      }
      grid.cells.push_back(ec);
    }
  return grid;
}

void write_results_csv(const std::string& path, const EvalGrid& grid) {
  std::ofstream os(path);
  if (!os) throw IoError("results: cannot write " + path);
  os << "obs,pred,moc\n";
  char buf[64];
  for (const auto& c : grid.cells) {
    std::snprintf(buf, sizeof(buf), "%.1f,%.1f,%.6f\n", c.obs_frac, c.pred_frac, c.moc);
    os << buf;
  }
  if (!os) throw IoError("results: write failed for " + path);
}

EvalGrid read_results_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("results: cannot open " + path);
  std::string line;
  if (!std::getline(is, line) || line.rfind("obs,pred,moc", 0) != 0)
    throw IoError("results: bad header in " + path);
  EvalGrid grid;
  grid.obs_fracs.clear();
  grid.pred_fracs.clear();
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    EvalCell c;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &c.obs_frac, &c.pred_frac, &c.moc) != 3)
      throw IoError("results: malformed row in " + path);
    grid.cells.push_back(c);
    bool seen_obs = false;
    for (double o : grid.obs_fracs) seen_obs = seen_obs || o == c.obs_frac;
    if (!seen_obs) grid.obs_fracs.push_back(c.obs_frac);
    bool seen_pred = false;
    for (double p : grid.pred_fracs) seen_pred = seen_pred || p == c.pred_frac;
    if (!seen_pred) grid.pred_fracs.push_back(c.pred_frac);
  }
  return grid;
}

}  // namespace anticipate
