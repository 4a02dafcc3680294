from setuptools import setup, find_packages


def readme():
    with open('README.md') as f:
        return f.read()


setup(
    name='epinet-tools',
    version='0.1',
    description='Bayesian inference of latent contact networks from SI epidemics on preferential attachment networks.',
    long_description=readme(),
    license='BSD 3-Clause License',
    packages=find_packages(exclude=['tests']),
    package_data={'epinet_tools.data': ['default_config.txt']},
    include_package_data=True,
    entry_points={
        'console_scripts': [
            'epinet=epinet_tools.script.epinet:main',
        ],
    },
)
