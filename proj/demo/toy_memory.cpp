// Writes a short synthetic clip into a small model and recalls it in both
// read modes.

#include <iostream>

#include "pcam/pcam.hpp"

int main() {
  const pcam::Waveform clip = pcam::synth::incommensurate_triad(5 * 64, 16000);
  const pcam::SegmentedSequence seq = pcam::segment(clip, 4.0);  // 64-sample segments

  pcam::WriteConfig wc;
  wc.epochs = 300;
  wc.eta_w = 1e-3;
  auto model = pcam::init_model(256, seq.segment_len, pcam::Activation::tanh, pcam::Activation::tanh, 7, wc);
  auto written = pcam::write_sequence(std::move(model), seq, wc);
  std::cout << "energy: first epoch " << written.epoch_energy.front() << ", last epoch "
            << written.epoch_energy.back() << "\n";

  for (auto mode : {pcam::ReadMode::open_loop, pcam::ReadMode::closed_loop}) {
    pcam::ReadConfig rc;
    rc.mode = mode;
    rc.n_segments = seq.count();
    const auto recall = pcam::read_sequence(written.model, rc);
    const auto rep = pcam::fidelity_report(seq, recall, 8);
    std::cout << pcam::to_string(mode) << ": clip cosine " << rep.clip_cosine << ", SNR " << rep.clip_snr_db
              << " dB\n";
  }
}
