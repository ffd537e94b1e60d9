"""Regenerate the bundled ground-station catalog.

Sites are jittered around anchor cities; the per-region counts follow the
published gateway skew (most stations in North America and Europe, very few
in Africa and mainland Asia).  Capacity is 1.25 Gbps per antenna.

    python3 tools/make_catalog.py > src/orbittransit/data/ground_stations.csv
"""

import random

# (name, lat, lon, stations, (min antennas, max antennas))
ANCHORS = [
    # North America
    ("seattle", 47.5, -122.3, 3, (6, 8)), ("portland", 45.5, -122.7, 2, (6, 8)),
    ("bay-area", 37.5, -121.9, 3, (6, 8)), ("los-angeles", 34.0, -118.2, 3, (6, 8)),
    ("sacramento", 38.6, -121.5, 1, (6, 8)), ("las-vegas", 36.2, -115.1, 1, (6, 8)),
    ("phoenix", 33.4, -112.0, 2, (6, 8)), ("salt-lake", 40.8, -111.9, 2, (6, 8)),
    ("boise", 43.6, -116.2, 1, (4, 6)), ("denver", 39.7, -104.9, 2, (6, 8)),
    ("albuquerque", 35.1, -106.6, 1, (4, 6)), ("billings", 45.8, -108.5, 1, (4, 6)),
    ("dallas", 32.8, -96.8, 3, (6, 8)), ("houston", 29.8, -95.4, 2, (6, 8)),
    ("oklahoma", 35.5, -97.5, 1, (4, 6)), ("kansas-city", 39.1, -94.6, 2, (6, 8)),
    ("omaha", 41.3, -96.0, 1, (4, 6)), ("fargo", 46.9, -96.8, 1, (4, 6)),
    ("minneapolis", 45.0, -93.3, 2, (6, 8)), ("chicago", 41.9, -87.6, 3, (6, 8)),
    ("st-louis", 38.6, -90.2, 1, (6, 8)), ("nashville", 36.2, -86.8, 2, (6, 8)),
    ("atlanta", 33.7, -84.4, 3, (6, 8)), ("miami", 25.8, -80.2, 2, (6, 8)),
    ("charlotte", 35.2, -80.8, 2, (6, 8)), ("washington", 38.9, -77.0, 3, (6, 8)),
    ("new-york", 40.7, -74.0, 3, (6, 8)), ("boston", 42.4, -71.1, 2, (6, 8)),
    ("detroit", 42.3, -83.0, 2, (6, 8)), ("pittsburgh", 40.4, -80.0, 1, (6, 8)),
    ("columbus", 40.0, -83.0, 2, (6, 8)), ("spokane", 47.7, -117.4, 1, (4, 6)),
    ("el-paso", 31.8, -106.4, 1, (4, 6)), ("new-orleans", 30.0, -90.1, 1, (4, 6)),
    ("raleigh", 35.8, -78.6, 1, (6, 8)), ("edmonton", 53.5, -113.5, 1, (4, 6)),
    ("anchorage", 61.2, -149.9, 1, (2, 4)),
    ("fairbanks", 64.8, -147.7, 1, (2, 4)), ("honolulu", 21.3, -157.9, 1, (2, 4)),
    ("vancouver", 49.3, -123.1, 1, (4, 6)), ("calgary", 51.0, -114.1, 2, (4, 6)),
    ("winnipeg", 49.9, -97.1, 1, (4, 6)), ("toronto", 43.7, -79.4, 2, (4, 6)),
    ("montreal", 45.5, -73.6, 1, (4, 6)), ("st-johns", 47.6, -52.7, 1, (2, 4)),
    ("monterrey", 25.7, -100.3, 1, (2, 4)), ("mexico-city", 19.4, -99.1, 1, (2, 4)),
    ("merida", 21.0, -89.6, 1, (2, 4)), ("san-juan", 18.4, -66.1, 1, (2, 4)),
    # South America
    ("sao-paulo", -23.5, -46.6, 3, (4, 6)), ("rio", -22.9, -43.2, 2, (4, 6)),
    ("brasilia", -15.8, -47.9, 1, (2, 4)), ("fortaleza", -3.7, -38.5, 1, (2, 4)),
    ("manaus", -3.1, -60.0, 1, (1, 2)), ("porto-alegre", -30.0, -51.2, 1, (2, 4)),
    ("recife", -8.0, -34.9, 1, (2, 4)), ("santiago", -33.4, -70.6, 2, (2, 4)),
    ("puerto-montt", -41.5, -72.9, 1, (1, 2)), ("punta-arenas", -53.2, -70.9, 1, (1, 2)),
    ("buenos-aires", -34.6, -58.4, 2, (2, 4)), ("cordoba", -31.4, -64.2, 1, (2, 4)),
    ("bogota", 4.7, -74.1, 2, (1, 2)), ("lima", -12.0, -77.0, 2, (1, 2)),
    # Europe and the Atlantic
    ("london", 51.5, -0.1, 3, (6, 8)), ("manchester", 53.5, -2.2, 1, (6, 8)),
    ("cornwall", 50.3, -5.1, 1, (6, 8)), ("edinburgh", 55.9, -3.2, 1, (4, 6)),
    ("dublin", 53.3, -6.3, 1, (4, 6)), ("paris", 48.9, 2.4, 2, (6, 8)),
    ("bordeaux", 44.8, -0.6, 1, (4, 6)), ("marseille", 43.3, 5.4, 1, (4, 6)),
    ("frankfurt", 50.1, 8.7, 2, (6, 8)), ("munich", 48.1, 11.6, 1, (6, 8)),
    ("berlin", 52.5, 13.4, 1, (6, 8)), ("amsterdam", 52.4, 4.9, 1, (6, 8)),
    ("brussels", 50.8, 4.4, 1, (4, 6)), ("madrid", 40.4, -3.7, 2, (4, 6)),
    ("seville", 37.4, -6.0, 1, (4, 6)), ("lisbon", 38.7, -9.1, 1, (4, 6)),
    ("milan", 45.5, 9.2, 1, (4, 6)), ("rome", 41.9, 12.5, 1, (4, 6)),
    ("sicily", 37.5, 14.0, 1, (4, 6)), ("warsaw", 52.2, 21.0, 1, (4, 6)),
    ("krakow", 50.1, 19.9, 1, (4, 6)), ("oslo", 59.9, 10.8, 1, (4, 6)),
    ("stockholm", 59.3, 18.1, 1, (4, 6)), ("helsinki", 60.2, 24.9, 1, (4, 6)),
    ("athens", 38.0, 23.7, 1, (2, 4)), ("istanbul", 41.0, 29.0, 1, (2, 4)),
    ("azores", 37.7, -25.7, 1, (1, 2)), ("canaries", 28.1, -15.4, 1, (1, 2)),
    # Oceania
    ("perth", -31.9, 115.9, 2, (4, 6)), ("adelaide", -34.9, 138.6, 1, (4, 6)),
    ("melbourne", -37.8, 145.0, 2, (4, 6)), ("sydney", -33.9, 151.2, 2, (4, 6)),
    ("brisbane", -27.5, 153.0, 2, (4, 6)), ("cairns", -16.9, 145.8, 1, (2, 4)),
    ("darwin", -12.5, 130.8, 1, (2, 4)), ("alice-springs", -23.7, 133.9, 1, (2, 4)),
    ("broome", -18.0, 122.2, 1, (2, 4)), ("hobart", -42.9, 147.3, 1, (2, 4)),
    ("auckland", -36.8, 174.8, 2, (2, 4)), ("christchurch", -43.5, 172.6, 1, (2, 4)),
    ("invercargill", -46.4, 168.4, 1, (1, 2)),
    # Asia and Africa (sparse)
    ("tokyo", 35.7, 139.7, 2, (2, 4)), ("hokkaido", 43.1, 141.3, 1, (2, 4)),
    ("kyushu", 33.6, 130.4, 1, (2, 4)), ("manila", 14.6, 121.0, 1, (1, 2)),
    ("davao", 7.1, 125.6, 1, (1, 2)), ("jakarta", -6.2, 106.8, 1, (1, 2)),
    ("kuala-lumpur", 3.1, 101.7, 1, (1, 2)), ("muscat", 23.6, 58.4, 1, (1, 2)),
    ("lagos", 6.5, 3.4, 1, (1, 2)), ("abuja", 9.1, 7.5, 1, (1, 2)),
    ("nairobi", -1.3, 36.8, 1, (1, 2)), ("maputo", -25.9, 32.6, 1, (1, 2)),
]

ANTENNA_MBPS = 1250


def main(seed=2024):
    rng = random.Random(seed)
    print("# Bundled ground-station catalog (synthetic sites around real gateway regions)")
    print("# id, latitude_deg, longitude_deg, capacity_mbps, antenna_count, site")
    gid = 0
    for name, lat, lon, count, (lo, hi) in ANCHORS:
        for _ in range(count):
            la = lat + rng.uniform(-0.8, 0.8)
            lo_ = lon + rng.uniform(-0.8, 0.8)
            ant = rng.randint(lo, hi)
            print("%d, %.4f, %.4f, %d, %d, %s" % (gid, la, lo_, ANTENNA_MBPS * ant, ant, name))
            gid += 1
    assert gid == 165, gid


if __name__ == "__main__":
    main()
