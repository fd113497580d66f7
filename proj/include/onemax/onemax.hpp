#pragma once

#include "onemax/binary_io.hpp"
#include "onemax/checkpoint.hpp"
#include "onemax/data.hpp"
#include "onemax/dsp.hpp"
#include "onemax/error.hpp"
#include "onemax/features.hpp"
#include "onemax/gradcheck.hpp"
#include "onemax/manifest.hpp"
#include "onemax/matrix.hpp"
#include "onemax/model.hpp"
#include "onemax/optim.hpp"
#include "onemax/parallel.hpp"
#include "onemax/params.hpp"
#include "onemax/rng.hpp"
#include "onemax/synth.hpp"
#include "onemax/train.hpp"
#include "onemax/wav.hpp"
