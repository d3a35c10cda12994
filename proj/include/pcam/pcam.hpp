#pragma once

#include "pcam/activation.hpp"
#include "pcam/audio_io.hpp"
#include "pcam/config.hpp"
#include "pcam/errors.hpp"
#include "pcam/experiment.hpp"
#include "pcam/gradcheck.hpp"
#include "pcam/memory.hpp"
#include "pcam/metrics.hpp"
#include "pcam/model.hpp"
#include "pcam/model_file.hpp"
#include "pcam/synth.hpp"
