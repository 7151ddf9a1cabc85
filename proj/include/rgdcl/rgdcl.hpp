#pragma once

#include "rgdcl/error.hpp"
#include "rgdcl/rng.hpp"
#include "rgdcl/vocab.hpp"
#include "rgdcl/tinylm.hpp"
#include "rgdcl/checkpoint.hpp"
#include "rgdcl/taskgen.hpp"
#include "rgdcl/rgd.hpp"
#include "rgdcl/replay.hpp"
#include "rgdcl/clmetrics.hpp"
#include "rgdcl/driver.hpp"
#include "rgdcl/io.hpp"
#include "rgdcl/config.hpp"
#include "rgdcl/report.hpp"
#include "rgdcl/experiment.hpp"
