#pragma once

#include "pmri/grid.hpp"
#include "pmri/fft.hpp"
#include "pmri/rng.hpp"
#include "pmri/sim.hpp"
#include "pmri/lifting.hpp"
#include "pmri/pslr.hpp"
#include "pmri/metrics.hpp"
#include "pmri/net.hpp"
#include "pmri/train.hpp"
#include "pmri/cgrid.hpp"
#include "pmri/config.hpp"
#include "pmri/dataset_io.hpp"
#include "pmri/timing.hpp"
