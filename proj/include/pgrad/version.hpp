#pragma once

#define PGRAD_VERSION "0.1.0"
